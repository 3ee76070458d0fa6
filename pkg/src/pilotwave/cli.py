#!/usr/bin/env python3
"""
pilotwave command line: run a scenario and write CSV / JSON / SVG artifacts.

Exit codes: 0 success, 2 validation error, 3 numerical failure (the run
manifest is still written).
"""

import argparse
import logging
import os
import sys

import numpy as np
import yaml

from . import dirac as dirac_sector
from . import scalar_field as scalar
from .config import load_settings
from .constraints import (FieldPhaseSpaceState, constraint_functional, constraint_matrix, dirac_bracket,
                          site_value)
from .ensemble import EnsembleSpec, equivariance_test, sample_density
from .errors import ConfigurationError, NumericalError, PilotWaveError, ValidationError
from .flow import ParticleState, evolve_coupled, evolve_extended, solve_multipliers
from .frames import FrameSeries
from .grid import GridSpec
from .guidance import integrate_trajectory
from .log import create_logger
from .outputs import OutputWriter
from .scenario import (DIRAC, INTEGRATORS, RK4, SCHRODINGER, default_scenario, load_points,
                       load_scenario, parse_descriptor, parse_points)
from .solvers import (SOLVER_METHODS, CrankNicolsonSolver, SolverConfig, continuity_residual, energy,
                      make_solver)

logger = logging.getLogger("pilotwave.cli")

MULTIPLIER_SITE_LIMIT = 256


class PilotWaveCLI:
    """One run of one subcommand: scenario in, artifacts out."""

    def __init__(self, args, settings):
        self.args = args
        self.settings = settings
        self.scenario = None
        self.results = {}
        defaults = settings.get("defaults", {})
        self.writer = OutputWriter(
            args.out_dir or defaults.get("output_dir", "pilotwave_output"),
            precision=int(defaults.get("csv_precision", 17)),
            plots=bool(args.plot or defaults.get("plot", False)),
        )

    def load_scenario(self):
        args = self.args
        if getattr(args, "scenario", None):
            try:
                scenario = load_scenario(args.scenario, self.settings)
            except OSError as e:
                raise ConfigurationError(f"cannot read scenario {args.scenario}: {e}") from None
            print(f"  ✓ Using scenario: {args.scenario}")
        else:
            scenario = default_scenario(self.settings)
        return scenario.with_overrides(hbar=args.hbar, mass=args.mass, seed=args.seed)

    def run(self):
        command = self.args.command
        print(f"\npilotwave {command}")
        print("=" * 60)
        try:
            self.scenario = self.load_scenario()
            COMMANDS[command](self)
        except ValidationError as e:
            print(f"  ✗ {e}")
            logger.error("%s: %s", type(e).__name__, e)
            return e.exit_code
        except NumericalError as e:
            print(f"  ✗ {type(e).__name__}: {e}")
            logger.error("%s: %s", type(e).__name__, e)
            self.results["failure"] = {"type": type(e).__name__, "message": str(e)}
            if getattr(e, "time", None) is not None:
                self.results["failure"].update(time=e.time, position=e.position)
            self.write_manifest("failed", str(e))
            return e.exit_code
        except PilotWaveError as e:
            print(f"  ✗ {e}")
            return e.exit_code
        self.write_manifest("completed")
        print("\n" + "=" * 60)
        print(f"{command}: {len(self.writer.saved)} files in {self.writer.out_dir}/")
        return 0

    def write_manifest(self, status, error=None):
        try:
            self.writer.write_manifest(self.args.command, self.scenario, status, self.results, error)
        except ValidationError as e:
            print(f"  ✗ Manifest not written: {e}")

    # Schrodinger sector

    def _require_sector(self, *sectors):
        if self.scenario.sector not in sectors:
            raise ConfigurationError(
                f"'{self.args.command}' needs a {' or '.join(sectors)} scenario, got sector '{self.scenario.sector}'"
            )

    def _frames(self, scenario, h, psi):
        """Frames from the scenario's integrator; the extended-flow trajectory too when it is rk4."""
        cfg = scenario.integrator
        if cfg["method"] == RK4:
            start = FieldPhaseSpaceState.on_constraint(psi, scenario.hbar)
            trajectory = evolve_extended(start, h, cfg["dt"], cfg["steps"], cfg["record_every"])
            return FrameSeries(trajectory.times, tuple(s.psi for s in trajectory.states)), trajectory
        config = SolverConfig(cfg["method"], cfg["dt"], scenario.tolerances["linear_solve"])
        return make_solver(config, h).run(psi, cfg["steps"], cfg["record_every"]), None

    def _write_frames(self, frames):
        grid = frames.grid
        coords = [c.ravel() for c in grid.coordinates()]
        axes = ["x"] if grid.dimension == 1 else ["x", "y"]
        rows = []
        for t, psi in frames:
            values = psi.values.ravel()
            for site in range(grid.site_count):
                z = values[site]
                rows.append((float(t), site, *(c[site] for c in coords), z.real, z.imag, abs(z) ** 2))
        self.writer.write_csv("frames.csv", ["t", "site", *axes, "re", "im", "density"], rows)
        if grid.dimension == 1:
            density = np.array([psi.density() for _, psi in frames])
            axis = grid.axis()
            self.writer.heatmap("density.svg", "|psi|^2", density,
                                (axis[0], axis[-1], frames.start, frames.end))

    def evolve(self):
        self._require_sector(SCHRODINGER)
        args = self.args
        self.scenario = self.scenario.updated(
            "integrator", method=args.integrator, dt=args.dt, steps=args.steps,
            record_every=args.record_every, compare_cn=True if args.compare_cn else None,
        )
        scenario = self.scenario
        cfg = scenario.integrator
        h = scenario.hamiltonian()
        psi = scenario.initial_psi(h)
        positions = scenario.particle_positions()
        residuals = None
        if cfg["method"] == RK4 and len(positions):
            start = FieldPhaseSpaceState.on_constraint(psi, scenario.hbar)
            particles = ParticleState(positions, masses=scenario.mass)
            coupled = evolve_coupled(start, particles, h, cfg["dt"], cfg["steps"],
                                     scenario.particles["policy"], cfg["record_every"])
            frames = FrameSeries(coupled.times, tuple(s.psi for s in coupled.fields))
            residuals = coupled.constraint_residuals
            self._write_particles(coupled)
            self.results["max_particle_momentum"] = coupled.max_momentum
            self.results["particle_constraint_violated"] = coupled.constraint_violation
            self.results["refined_steps"] = coupled.refined_steps
        else:
            frames, trajectory = self._frames(scenario, h, psi)
            if trajectory is not None:
                residuals = trajectory.constraint_residuals

        columns = ["t", "norm", "energy"]
        if residuals is not None:
            columns.append("constraint_residual")
        distances = None
        if cfg["compare_cn"]:
            reference = CrankNicolsonSolver(h, cfg["dt"], scenario.tolerances["linear_solve"])
            reference = reference.run(psi, cfg["steps"], cfg["record_every"])
            distances = [(reference.at(t) - frame).norm() for t, frame in frames]
            columns.append("l2_cn")
        rows = []
        for index, (t, frame) in enumerate(frames):
            row = [float(t), frame.norm(), energy(frame, h, t)]
            if residuals is not None:
                row.append(float(residuals[index]))
            if distances is not None:
                row.append(distances[index])
            rows.append(row)

        self._write_frames(frames)
        self.writer.write_csv("diagnostics.csv", columns, rows)
        norms = np.array([row[1] for row in rows])
        self.results.update(
            integrator=cfg["method"],
            final_time=frames.end,
            final_norm=float(norms[-1]),
            max_norm_drift=float(np.max(np.abs(norms - norms[0]))),
            energy_initial=rows[0][2],
            energy_final=rows[-1][2],
        )
        if residuals is not None:
            self.results["max_constraint_residual"] = float(np.max(residuals))
        if distances is not None:
            self.results["max_l2_cn"] = float(np.max(distances))
            print(f"  ✓ Max L2 distance to Crank-Nicolson: {self.results['max_l2_cn']:.3e}")
        self.writer.line_plot("diagnostics.svg", "norm", [("norm", frames.times, norms)], ylabel="||psi||")

    def _write_particles(self, coupled):
        dimension = coupled.particles[0].positions.shape[1]
        axes = ["x"] if dimension == 1 else ["x", "y"]
        momenta = ["p"] if dimension == 1 else ["px", "py"]
        rows = []
        for t, state in zip(coupled.times, coupled.particles):
            for index in range(state.count):
                rows.append((float(t), index, *state.positions[index], *state.momenta[index]))
        self.writer.write_csv("particles.csv", ["t", "particle", *axes, *momenta], rows)

    def solve(self):
        self._require_sector(SCHRODINGER)
        args = self.args
        method = args.solver
        if method is None:
            method = self.scenario.integrator["method"]
            method = method if method in SOLVER_METHODS else SOLVER_METHODS[0]
        self.scenario = self.scenario.updated("integrator", method=method, dt=args.dt, steps=args.steps,
                                              record_every=args.record_every)
        scenario = self.scenario
        h = scenario.hamiltonian()
        frames, _ = self._frames(scenario, h, scenario.initial_psi(h))
        rows = [(float(t), psi.norm(), energy(psi, h, t), continuity_residual(psi, h, t)) for t, psi in frames]
        self._write_frames(frames)
        self.writer.write_csv("diagnostics.csv", ["t", "norm", "energy", "continuity_residual"], rows)
        norms = np.array([row[1] for row in rows])
        self.results.update(
            solver=method,
            final_time=frames.end,
            final_norm=float(norms[-1]),
            max_norm_drift=float(np.max(np.abs(norms - norms[0]))),
            energy_initial=rows[0][2],
            energy_final=rows[-1][2],
            max_continuity_residual=float(max(row[3] for row in rows)),
        )

    def trajectories(self):
        self._require_sector(SCHRODINGER)
        args = self.args
        self.scenario = self.scenario.updated("particles", policy=args.policy)
        self.scenario = self.scenario.updated("integrator", dt=args.dt, steps=args.steps)
        scenario = self.scenario
        grid = scenario.grid_spec()
        h = scenario.hamiltonian()
        if args.initial_points:
            points = self._initial_points(args.initial_points, scenario, h)
            self.scenario = scenario.updated("particles", positions=points.tolist())
            scenario = self.scenario
        points = scenario.particle_positions()
        if not len(points):
            raise ConfigurationError("no initial points: pass --initial-points or set particles.positions")
        frames, _ = self._frames(scenario, h, scenario.initial_psi(h))
        result = integrate_trajectory(frames, points, scenario.integrator["dt"], hbar=scenario.hbar,
                                      mass=scenario.mass, policy=scenario.particles["policy"],
                                      node_threshold=scenario.tolerances["node_threshold"])
        axes = ["x"] if grid.dimension == 1 else ["x", "y"]
        self.writer.write_csv("trajectories.csv", ["t", "particle", *axes, "speed", "node_event"], list(result.rows()))
        self.results.update(
            particles=int(points.shape[0]),
            policy=result.policy,
            final_time=float(result.times[-1]),
            final_positions=result.final_positions,
            halted_fraction=result.halted_fraction,
            node_events=[event.to_dict() for event in result.node_events],
        )
        if grid.dimension == 1:
            series = [(f"X{i}", result.times, result.paths[:, i, 0]) for i in range(result.paths.shape[1])]
            self.writer.line_plot("trajectories.svg", "trajectories", series, ylabel="x")
        else:
            series = [(f"X{i}", result.paths[:, i, 0], result.paths[:, i, 1]) for i in range(result.paths.shape[1])]
            self.writer.line_plot("trajectories.svg", "trajectories", series, xlabel="x", ylabel="y")

    @staticmethod
    def _initial_points(text, scenario, h):
        """A points file, 'sample:N' draws from |psi_0|^2, anything else is a literal list."""
        dimension = h.grid.dimension
        if os.path.isfile(text):
            return load_points(text, dimension)
        if text.startswith("sample:"):
            _, params = parse_descriptor(text)
            count = params.get("value")
            if not isinstance(count, int) or count <= 0:
                raise ConfigurationError(f"'{text}': expected sample:N with a positive integer N")
            return sample_density(scenario.initial_psi(h), count, scenario.seed)
        return parse_points(text, dimension)

    def equivariance(self):
        self._require_sector(SCHRODINGER)
        args = self.args
        self.scenario = self.scenario.updated("ensemble", samples=args.samples, metric=args.metric)
        self.scenario = self.scenario.updated("particles", policy=args.policy)
        scenario = self.scenario
        ens = scenario.ensemble
        spec = EnsembleSpec(ens["samples"], scenario.seed, ens["metric"], ens["bins"])
        h = scenario.hamiltonian()
        frames, _ = self._frames(scenario, h, scenario.initial_psi(h))
        report = equivariance_test(frames, spec, dt=scenario.integrator["dt"], hbar=scenario.hbar,
                                   mass=scenario.mass, policy=scenario.particles["policy"],
                                   checkpoints=ens["checkpoints"])
        self.writer.write_json("equivariance.json", report.to_dict())
        self.results.update(
            ks_initial=report.ks_initial,
            ks_final=report.ks_final,
            ks_threshold=report.threshold,
            discretization_budget=report.budget,
            passed=report.passed,
            halted_fraction=report.halted_fraction,
            samples=spec.samples,
            metric=spec.metric,
        )
        mark = "✓" if report.passed else "✗"
        print(f"  {mark} KS(T) = {report.ks_final:.4g} against {report.threshold + report.budget:.4g}")
        edges = np.asarray(report.histogram["bin_edges"])
        centers = 0.5 * (edges[1:] + edges[:-1])
        self.writer.line_plot("equivariance.svg", "ensemble histogram at T",
                              [("counts", centers, report.histogram["counts"]),
                               ("expected", centers, report.histogram["expected"])], xlabel="x", ylabel="count")

    def check_constraints(self):
        self._require_sector(SCHRODINGER, DIRAC)
        if self.scenario.sector == DIRAC:
            return self._check_spinor_constraints()
        scenario = self.scenario
        grid = scenario.grid_spec()
        hbar = scenario.hbar
        tolerance = scenario.tolerances["constraint"]
        rng = np.random.default_rng(scenario.seed)
        fields = [rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape) for _ in range(4)]
        state = FieldPhaseSpaceState.on_constraint(scenario.initial_psi(), hbar).with_arrays(fields)
        count = min(self.args.sites or 4, grid.site_count)
        sites = sorted(int(s) for s in rng.choice(grid.site_count, size=count, replace=False))

        report = constraint_matrix(state, sites, hbar)
        antisymmetry = float(np.max(np.abs(report.matrix + report.matrix.T)))
        expected = hbar / grid.cell_volume
        singular_error = abs(report.smallest_singular_value - expected) / expected
        constraints = [constraint_functional(which, site, grid, hbar) for site in sites for which in (1, 2)]
        targets = constraints + [site_value(name, sites[0], grid) for name in ("psi", "pi_psi_star")]
        dirac_max = max(abs(dirac_bracket(phi, chi, state, sites, hbar))
                        for phi in constraints for chi in targets)
        payload = {
            "constraint_matrix": report.to_dict(),
            "antisymmetry_error": antisymmetry,
            "expected_singular_value": expected,
            "singular_value_relative_error": singular_error,
            "max_dirac_bracket_with_constraint": dirac_max,
            "initial_state_constraint_residual": FieldPhaseSpaceState.on_constraint(
                scenario.initial_psi(), hbar).constraint_residual(hbar),
        }
        if grid.site_count <= MULTIPLIER_SITE_LIMIT:
            h = scenario.hamiltonian()
            multipliers = solve_multipliers(FieldPhaseSpaceState.on_constraint(scenario.initial_psi(h), hbar), h)
            scale = max(1.0, float(np.max(np.abs(multipliers.closed_form_u1.values))))
            payload["multiplier_relative_deviation"] = multipliers.max_deviation / scale
        passed = (antisymmetry < tolerance and singular_error < tolerance and dirac_max < tolerance
                  and payload.get("multiplier_relative_deviation", 0.0) < tolerance and report.second_class)
        payload["passed"] = bool(passed)
        self.writer.write_json("constraints.json", payload)
        self.results.update(
            classification=report.to_dict()["classification"],
            smallest_singular_value=report.smallest_singular_value,
            max_dirac_bracket_with_constraint=dirac_max,
            passed=bool(passed),
        )
        mark = "✓" if passed else "✗"
        sigma = report.smallest_singular_value
        print(f"  {mark} constraints are {self.results['classification']} (sigma_min = {sigma:.6g})")

    def _check_spinor_constraints(self):
        scenario = self.scenario
        cfg = scenario.dirac
        algebra = dirac_sector.representation(cfg["representation"])
        grid = GridSpec(1, cfg["lattice_points"], 2.0 * np.pi)
        momentum = 2.0 * np.pi * cfg["lattice_n"] / grid.length
        spinor_field = dirac_sector.plane_wave_field(momentum, cfg["mass"], algebra)
        state = dirac_sector.SpinorLatticeState.from_field(grid, spinor_field)
        report = dirac_sector.dirac_field_constraint_brackets(state)
        check = dirac_sector.dirac_lattice_eom_check(state, mass=cfg["mass"])
        rate = dirac_sector.phase_rate(state, mass=cfg["mass"])
        expected = float(np.sqrt(momentum ** 2 + cfg["mass"] ** 2))
        tolerance = scenario.tolerances["constraint"]
        passed = report.second_class and check.residual < tolerance
        payload = {
            "constraint_matrix": report.to_dict(),
            "lattice_eom_residual": check.residual,
            "phase_rate": rate,
            "expected_phase_rate": expected,
            "passed": bool(passed),
        }
        self.writer.write_json("constraints.json", payload)
        self.results.update(lattice_eom_residual=check.residual, passed=bool(passed),
                            classification=payload["constraint_matrix"]["classification"])
        mark = "✓" if passed else "✗"
        print(f"  {mark} spinor constraints {self.results['classification']}, EOM residual {check.residual:.3e}")

    # Dirac sector

    def dirac(self):
        args = self.args
        self.scenario = self.scenario.updated("dirac", spinor=args.spinor, dtau=args.dtau, steps=args.steps,
                                              representation=args.representation)
        scenario = self.scenario
        cfg = scenario.dirac
        algebra = dirac_sector.representation(cfg["representation"])
        spinor_field = spinor_from_descriptor(cfg["spinor"], cfg, algebra)
        start = np.array(cfg["start"], dtype=float)
        worldline = dirac_sector.integrate_worldline(spinor_field, start, cfg["dtau"], cfg["steps"])
        norms = np.einsum("ni,ij,nj->n", worldline.currents, dirac_sector.ETA, worldline.currents)
        self.writer.write_csv("worldline.csv",
                              ["tau", "t", "x", "y", "z", "J0", "J1", "J2", "J3", "a", "b"],
                              list(worldline.rows()))
        self.results.update(
            spinor=spinor_field.descriptor,
            final_event=worldline.events[-1],
            max_norm_deviation=float(np.max(np.abs(norms - 1.0))),
            particle_energy=worldline.particle_energy,
            truncated=worldline.truncated,
            truncation=worldline.event,
        )
        if spinor_field.descriptor["kind"] == "superposition":
            p, c = spinor_field.descriptor["momentum"], spinor_field.descriptor["ratio"]
            predicted = dirac_sector.superposition_period(p, c, spinor_field.descriptor["mass"])
            self.results["predicted_period"] = predicted
            try:
                self.results["measured_period"] = (worldline.coordinate_time_at(start[1] + np.pi / p) - start[0])
            except ConfigurationError:
                self.results["measured_period"] = None
        self.writer.line_plot("worldline.svg", "worldline",
                              [("x(t)", worldline.events[:, 0], worldline.events[:, 1])], xlabel="t", ylabel="x")

    # Scalar-field sector

    def scalar_field(self):
        args = self.args
        self.scenario = self.scenario.updated("particles", policy=args.policy)
        self.scenario = self.scenario.updated("scalar_field", n_max=args.modes, state=args.state, dt=args.dt,
                                              steps=args.steps)
        cfg = self.scenario.scalar_field
        modes = scalar.ModeSet(cfg["box_length"], cfg["n_max"], cfg["mass"], cfg["include_zero"])
        state = mode_state_from_descriptor(cfg["state"], modes)
        q0 = state.center + cfg["offset"]
        trajectory = scalar.evolve_coupled_modes(state, scalar.ModeParticleState(q0), cfg["dt"], cfg["steps"],
                                                 cfg["record_every"], self.scenario.particles["policy"])
        rows = []
        for s, q, p in zip(trajectory.states, trajectory.coordinates, trajectory.momenta):
            for index, n in enumerate(modes.numbers):
                rows.append((s.time, int(n), q[index].real, q[index].imag, p[index].real, p[index].imag,
                             s.alpha[index].real, s.alpha[index].imag, s.center[index].real, s.center[index].imag))
        self.writer.write_csv("modes.csv", ["t", "n", "q_re", "q_im", "p_re", "p_im", "alpha_re", "alpha_im",
                                            "center_re", "center_im"], rows)
        x = np.linspace(0.0, modes.box_length, cfg["field_points"], endpoint=False)
        field_rows = []
        for s, q in zip(trajectory.states, trajectory.coordinates):
            phi = scalar.reconstruct_field(modes, q, x)
            field_rows.extend((s.time, xi, value) for xi, value in zip(x, phi))
        self.writer.write_csv("field.csv", ["t", "x", "phi"], field_rows)
        energies = np.array([s.energy() for s in trajectory.states])
        norms = np.array([s.norms() for s in trajectory.states])
        self.results.update(
            modes=modes.to_dict(),
            state=state.to_dict(),
            final_state=trajectory.states[-1].to_dict(),
            energy_initial=float(energies[0]),
            energy_final=float(energies[-1]),
            vacuum_energy=scalar.vacuum_energy(modes),
            max_norm_deviation=float(np.max(np.abs(norms - 1.0))),
            max_coordinate_displacement=float(np.max(np.abs(trajectory.coordinates - q0))),
            max_momentum=trajectory.max_momentum,
        )
        times = trajectory.times
        series = [(f"|q_{n}|", times, np.abs(trajectory.coordinates[:, i])) for i, n in enumerate(modes.numbers[:4])]
        self.writer.line_plot("modes.svg", "mode coordinates", series, ylabel="|q|")


COMMANDS = {
    "evolve": PilotWaveCLI.evolve,
    "solve": PilotWaveCLI.solve,
    "trajectories": PilotWaveCLI.trajectories,
    "equivariance": PilotWaveCLI.equivariance,
    "check-constraints": PilotWaveCLI.check_constraints,
    "dirac": PilotWaveCLI.dirac,
    "scalar-field": PilotWaveCLI.scalar_field,
}


def spinor_from_descriptor(text, cfg, algebra):
    """rest | plane:p=0.5 | boosted:0.6 | superpose:p=0.5,c=0.3 (unset values from the dirac section)."""
    kind, params = parse_descriptor(text)
    mass = float(params.get("m", cfg["mass"]))
    if kind == "rest":
        return dirac_sector.rest_field(mass, algebra)
    if kind == "plane":
        return dirac_sector.plane_wave_field(float(params.get("p", params.get("value", cfg["momentum"]))),
                                             mass, algebra)
    if kind == "boosted":
        beta = float(params.get("beta", params.get("value", cfg["beta"])))
        return dirac_sector.boosted_field(beta, mass, algebra)
    if kind in ("superpose", "superposition"):
        return dirac_sector.superposition_field(float(params.get("p", cfg["momentum"])),
                                                float(params.get("c", cfg["ratio"])), mass, algebra)
    raise ConfigurationError(f"unknown spinor '{kind}' (expected rest, plane, boosted or superpose)")


def _mode_index(modes, n):
    numbers = list(modes.numbers)
    if n not in numbers:
        raise ConfigurationError(f"mode n={n} is not in the half-set {numbers}")
    return numbers.index(n)


def mode_state_from_descriptor(text, modes):
    """vacuum | coherent:n=1,re=0.5,im=0 | squeezed:n=1,alpha=2.0."""
    kind, params = parse_descriptor(text)
    if kind == "vacuum":
        return scalar.vacuum_state(modes)
    index = _mode_index(modes, int(params.get("n", 1)))
    if kind == "coherent":
        amplitudes = np.zeros(len(modes), dtype=complex)
        amplitudes[index] = complex(float(params.get("re", 0.5)), float(params.get("im", 0.0)))
        return scalar.coherent_state(modes, amplitudes)
    if kind == "squeezed":
        alpha = modes.omegas.astype(complex)
        alpha[index] = complex(float(params.get("alpha", params.get("value", 2.0))), float(params.get("alpha_im", 0.0)))
        return scalar.squeezed_state(modes, alpha)
    raise ConfigurationError(f"unknown mode state '{kind}' (expected vacuum, coherent or squeezed)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pilotwave",
        description="Pilot-wave dynamics from constrained Hamiltonians",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog='''
Examples:
  %(prog)s evolve --scenario scenarios/free_gaussian.yaml --integrator rk4 --compare-cn
  %(prog)s solve --scenario scenarios/harmonic.yaml --solver split-step
  %(prog)s trajectories --scenario scenarios/free_gaussian.yaml --initial-points=-1.0,0.0,1.0
  %(prog)s --seed 7 equivariance --scenario scenarios/double_gaussian.yaml
  %(prog)s check-constraints --sites 4
  %(prog)s dirac --spinor superpose:p=0.5,c=0.3 --dtau 0.01 --steps 2000
  %(prog)s scalar-field --modes 8 --state coherent:n=1,re=0.5,im=0
        '''
    )
    parser.add_argument('--out-dir', help='Output directory')
    parser.add_argument('--seed', type=int, help='Random seed (overrides the scenario)')
    parser.add_argument('--hbar', type=float, help='Reduced Planck constant (overrides the scenario)')
    parser.add_argument('--mass', type=float, help='Particle mass (overrides the scenario)')
    parser.add_argument('--settings', help='Settings YAML overlaid on the packaged defaults')
    parser.add_argument('--plot', action='store_true', help='Also write SVG plots')
    parser.add_argument('--verbose', action='store_true', help='Debug logging')

    commands = parser.add_subparsers(dest='command', required=True)

    evolve = commands.add_parser('evolve', help='Evolve psi with the extended flow or a reference solver')
    evolve.add_argument('--scenario', help='Scenario YAML file')
    evolve.add_argument('--integrator', choices=list(INTEGRATORS), help='Time integrator')
    evolve.add_argument('--dt', type=float, help='Time step')
    evolve.add_argument('--steps', type=int, help='Number of steps')
    evolve.add_argument('--record-every', type=int, help='Record every n-th step')
    evolve.add_argument('--compare-cn', action='store_true', help='Add the L2 distance to Crank-Nicolson')

    solve = commands.add_parser('solve', help='Run a reference Schrodinger solver')
    solve.add_argument('--scenario', help='Scenario YAML file')
    solve.add_argument('--solver', choices=list(SOLVER_METHODS), help='Reference solver')
    solve.add_argument('--dt', type=float, help='Time step')
    solve.add_argument('--steps', type=int, help='Number of steps')
    solve.add_argument('--record-every', type=int, help='Record every n-th step')

    trajectories = commands.add_parser('trajectories', help='Integrate guidance trajectories')
    trajectories.add_argument('--scenario', help='Scenario YAML file')
    trajectories.add_argument('--initial-points',
                              help="'x1,x2,...' (1D), 'x,y;x,y' (2D), a points file or sample:N from |psi_0|^2")
    trajectories.add_argument('--policy', choices=['shrink', 'freeze'], help='Node policy')
    trajectories.add_argument('--dt', type=float, help='Time step')
    trajectories.add_argument('--steps', type=int, help='Number of steps')

    equivariance = commands.add_parser('equivariance', help='Transport a |psi|^2 ensemble and test it')
    equivariance.add_argument('--scenario', help='Scenario YAML file')
    equivariance.add_argument('--samples', type=int, help='Ensemble size')
    equivariance.add_argument('--metric', choices=['ks', 'histogram'], help='Pass/fail metric')
    equivariance.add_argument('--policy', choices=['shrink', 'freeze'], help='Node policy')

    check = commands.add_parser('check-constraints', help='Constraint matrix and Dirac-bracket checks')
    check.add_argument('--scenario', help='Scenario YAML file')
    check.add_argument('--sites', type=int, help='Number of lattice sites in the constraint matrix')

    dirac = commands.add_parser('dirac', help='Integrate a Dirac worldline')
    dirac.add_argument('--scenario', help='Scenario YAML file')
    dirac.add_argument('--spinor', help='rest | plane:p=0.5 | boosted:0.6 | superpose:p=0.5,c=0.3')
    dirac.add_argument('--dtau', type=float, help='Proper-time step')
    dirac.add_argument('--steps', type=int, help='Number of steps')
    dirac.add_argument('--representation', choices=['dirac', 'weyl'], help='Gamma-matrix representation')

    field = commands.add_parser('scalar-field', help='Evolve Gaussian mode wave functionals')
    field.add_argument('--scenario', help='Scenario YAML file')
    field.add_argument('--modes', type=int, help='Truncation |n| <= modes')
    field.add_argument('--state', help='vacuum | coherent:n=1,re=0.5,im=0 | squeezed:n=1,alpha=2.0')
    field.add_argument('--dt', type=float, help='Time step')
    field.add_argument('--steps', type=int, help='Number of steps')
    field.add_argument('--policy', choices=['shrink', 'freeze'], help='Node policy for the mode coordinates')

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings(args.settings)
    except (OSError, yaml.YAMLError) as e:
        print(f"  ✗ Cannot load settings: {e}")
        return ValidationError.exit_code
    level = "DEBUG" if args.verbose else settings.get("defaults", {}).get("log_level", "INFO")
    create_logger("pilotwave", level)
    return PilotWaveCLI(args, settings).run()


if __name__ == '__main__':
    sys.exit(main())
