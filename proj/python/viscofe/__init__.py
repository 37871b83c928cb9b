"""Python bindings for the viscofe solvers."""

from ._viscofe import (
    Error,
    MaterialParams,
    ShellExact,
    ShellGeometry,
    cauchy_stress,
    dissipation_rate,
    exact_shell_pressure,
    generate_cube_mesh,
    generate_shell_mesh,
    parse_config,
    patch_test,
    piola_stress_hybrid,
    rk5_step,
    run_config,
    shell_fem,
    tangent_moduli,
    uniaxial_stress,
    vhb4910,
)

__all__ = [
    "Error",
    "MaterialParams",
    "ShellExact",
    "ShellGeometry",
    "cauchy_stress",
    "dissipation_rate",
    "exact_shell_pressure",
    "generate_cube_mesh",
    "generate_shell_mesh",
    "parse_config",
    "patch_test",
    "piola_stress_hybrid",
    "rk5_step",
    "run_config",
    "shell_fem",
    "tangent_moduli",
    "uniaxial_stress",
    "vhb4910",
]
