"""Forward models: the closed-form linear model and the 2-D transient heat model."""

from embedcal.models.linear import LinearModel, linear_eval
from embedcal.models.thermal import (
    CONCRETE,
    STEEL,
    Material,
    SensorLayout,
    ThermalForward,
    ThermalModel,
    cumulative_heat,
    midline_heat_rate,
    sensor_temperatures,
    solve_transient,
    thermal_forward,
)

__all__ = [
    "CONCRETE",
    "STEEL",
    "LinearModel",
    "Material",
    "SensorLayout",
    "ThermalForward",
    "ThermalModel",
    "cumulative_heat",
    "linear_eval",
    "midline_heat_rate",
    "sensor_temperatures",
    "solve_transient",
    "thermal_forward",
]
