"""Energy-efficient OFDMA resource allocation under statistical delay QoS."""

from .channel_qos import UserQos, dbm_to_watts, theta_from_delay, watts_to_dbm
from .effective_capacity import ec_integrand_expectation, mc_effective_capacity, total_ec, user_ec
from .power_model import Allocation, SystemParams, eee, total_power
from .special_functions import ConvergenceError, DomainError, exp_integral_scaled

__version__ = "0.1.0"
