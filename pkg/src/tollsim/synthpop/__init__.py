"""Population and business-establishment synthesis."""

from tollsim.synthpop.establishments import (
    AggregateEstCounts,
    Building,
    Establishment,
    FloorModel,
    assign_to_buildings,
    estimate_floor_areas,
    readjust_floor_areas,
    sample_establishments,
    solve_mapping,
)
from tollsim.synthpop.fleet import Vehicle, allocate_vehicles, generate_fleet
from tollsim.synthpop.individuals import Individual, generate_individuals

__all__ = [
    "AggregateEstCounts",
    "Building",
    "Establishment",
    "FloorModel",
    "Individual",
    "Vehicle",
    "allocate_vehicles",
    "assign_to_buildings",
    "estimate_floor_areas",
    "generate_fleet",
    "generate_individuals",
    "readjust_floor_areas",
    "sample_establishments",
    "solve_mapping",
]
