"""
This module provides utility functions for the zonal dispatch package.

Functions:
- base_kw: The power base of a network in kW.
- base_impedance: The impedance base in ohms.
- ohm_to_pu / pu_to_ohm: Impedance conversion between physical units and per-unit.
- kw_to_pu / pu_to_kw: Power conversion between kW and per-unit.
- branch_label: A stable text label for a branch, e.g. "3-4".
- as_profile: Coerce a number or sequence into a float array of a given length.

Example usage:
    from .utils import ohm_to_pu

    r_pu = ohm_to_pu(0.0922, base_kv=12.66, base_mva=10.0)
"""

from typing import Iterable, Union

import numpy as np


def base_kw(base_mva: float) -> float:
    """
    Return the power base in kW.

    Arguments:
        base_mva (float): The power base in MVA.

    Returns:
        float: The power base in kW.
    """
    return base_mva * 1000.0


def base_impedance(base_kv: float, base_mva: float) -> float:
    """
    Return the impedance base in ohms.

    Arguments:
        base_kv (float): The voltage base in kV.
        base_mva (float): The power base in MVA.

    Returns:
        float: The impedance base in ohms.
    """
    return base_kv ** 2 / base_mva


def ohm_to_pu(value: float, base_kv: float, base_mva: float) -> float:
    """Convert an impedance from ohms to per-unit."""
    return value / base_impedance(base_kv, base_mva)


def pu_to_ohm(value: float, base_kv: float, base_mva: float) -> float:
    """Convert an impedance from per-unit to ohms."""
    return value * base_impedance(base_kv, base_mva)


def kw_to_pu(value: Union[float, np.ndarray], base_mva: float) -> Union[float, np.ndarray]:
    """Convert a power (scalar or array) from kW to per-unit."""
    return value / base_kw(base_mva)


def pu_to_kw(value: Union[float, np.ndarray], base_mva: float) -> Union[float, np.ndarray]:
    """Convert a power (scalar or array) from per-unit to kW."""
    return value * base_kw(base_mva)


def branch_label(from_bus: int, to_bus: int) -> str:
    """
    Create a stable text label for a branch.

    Arguments:
        from_bus (int): The sending bus id.
        to_bus (int): The receiving bus id.

    Returns:
        str: The label, e.g. "3-4".
    """
    return f"{from_bus}-{to_bus}"


def as_profile(value: Union[float, Iterable[float]], horizon: int) -> np.ndarray:
    """
    Coerce a scalar or a sequence into a float profile of the given length.

    A scalar is repeated for every hour; a sequence is converted as-is and its length is left for the
    caller to validate.

    Arguments:
        value (Union[float, Iterable[float]]): A constant or the hourly values.
        horizon (int): The number of hours.

    Returns:
        np.ndarray: The profile.
    """
    if np.isscalar(value):
        return np.full(horizon, float(value))  # type: ignore[arg-type]
    return np.asarray(list(value), dtype=float)  # type: ignore[arg-type]
