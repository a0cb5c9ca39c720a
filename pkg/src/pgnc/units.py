"""Unit conversions. Internally frequencies are angular rates in rad/ns, times in ns."""

import math

TWO_PI = 2.0 * math.pi


def mhz_to_rad_per_ns(f_mhz):
    """Convert f/2pi in MHz to an angular rate in rad/ns."""
    return TWO_PI * f_mhz * 1e-3


def rad_per_ns_to_mhz(w):
    return w / (TWO_PI * 1e-3)

