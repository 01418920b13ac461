"""Command-line interface: scenario runs with machine-readable output.

Each subcommand reproduces the data behind one kind of figure: regime
classification, discriminant maps, classical propagation, loops around
the third-order degeneracy, fixed-excitation quantum propagation,
holonomy, and degeneracy root-finding.  Output is CSV (comma separator,
'.' decimal, '#'-prefixed header) or JSON with the same records; complex
values are serialized as re/im column pairs ({"re": .., "im": ..} in
JSON).  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import families, fock, propagator, spectral
from .errors import TrimodeError

__all__ = ["RunConfig", "ConfigError", "run", "emit_intensities", "main"]

COMMANDS = ("classify", "map", "propagate", "loop", "fock", "holonomy", "find-ep")
FAMILIES = ("pt-cyclic", "chiral-1", "chiral-2")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Validated run parameters; serializes round-trip to JSON."""
    command: str
    family: str = "pt-cyclic"
    gamma: float = 1.0
    kappa1: str = "1.0"       # scalar, or "lo:hi" range for map / find-ep
    kappa2: str = "0.0"
    z_max: float = 10.0
    samples: int = 201
    n: int = 1
    state: str = "1,0,0"
    loop_r: float = 0.4253
    loop_turns: int = 1
    tol: float = 1e-10
    out: str | None = None
    format: str = "csv"
    jobs: int = 1
    eps_ep: float = 1e-9
    plot_script: bool = False

    def validate(self) -> "RunConfig":
        if self.command not in COMMANDS:
            raise ConfigError(f"command: unknown command {self.command!r}")
        if self.family not in FAMILIES:
            raise ConfigError(f"family: must be one of {FAMILIES}")
        if self.format not in ("csv", "json"):
            raise ConfigError("format: must be 'csv' or 'json'")
        for name in ("gamma", "z_max", "loop_r", "tol", "eps_ep"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name.replace('_', '-')}: not a finite number: {v!r}")
        if self.z_max <= 0:
            raise ConfigError("z-max: must be positive")
        if self.tol <= 0 or self.tol >= 1:
            raise ConfigError("tol: must be in (0, 1)")
        if self.samples < 2:
            raise ConfigError("samples: need at least 2")
        if self.n < 0:
            raise ConfigError("n: excitation number must be non-negative")
        if self.loop_r <= 0:
            raise ConfigError("loop-r: must be positive")
        if self.loop_turns < 1:
            raise ConfigError("loop-turns: need at least 1")
        if self.jobs < 1:
            raise ConfigError("jobs: need at least 1")
        for name in ("kappa1", "kappa2"):
            try:
                self._axis(name)
            except ConfigError:
                raise
            except Exception:
                raise ConfigError(f"{name}: cannot parse {getattr(self, name)!r}")
        return self

    # kappa flags double as map axes: plain number or "lo:hi" range
    def _axis(self, name: str):
        raw = str(getattr(self, name))
        if ":" in raw:
            lo, hi = (float(p) for p in raw.split(":", 1))
            if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
                raise ConfigError(f"{name}: bad range {raw!r}")
            return (lo, hi)
        v = float(raw)
        if not math.isfinite(v):
            raise ConfigError(f"{name}: not finite")
        return v

    def scalar(self, name: str) -> float:
        v = self._axis(name)
        if isinstance(v, tuple):
            raise ConfigError(f"{name}: expected a number, got a range")
        return v

    def range(self, name: str, default=None):
        v = self._axis(name)
        if isinstance(v, tuple):
            return v
        if default is not None:
            return default
        raise ConfigError(f"{name}: expected a 'lo:hi' range")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise ConfigError(f"config file: line {err.lineno}: {err.msg}")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"config file: unknown fields {sorted(unknown)}")
        if "command" not in data:
            raise ConfigError("config file: missing 'command'")
        return cls(**data).validate()


def _family(cfg: RunConfig):
    g = cfg.gamma
    if cfg.family == "pt-cyclic":
        return families.pt_cyclic(g, cfg.scalar("kappa1"), cfg.scalar("kappa2"))
    if cfg.family == "chiral-1":
        return families.chiral_1(g, cfg.scalar("kappa1"), cfg.scalar("kappa2"))
    return families.chiral_2(g, cfg.scalar("kappa1"))


def _parse_classical_state(text: str) -> np.ndarray:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"state: need 3 comma-separated amplitudes, got {text!r}")
    try:
        return np.array([complex(p) for p in parts])
    except ValueError:
        raise ConfigError(f"state: cannot parse {text!r}")


def _parse_fock_state(text: str, b: fock.FockBasis) -> fock.FockVector:
    """Occupation triple '2,0,0' or superposition '(2,0,0)+(0,2,0)'."""
    text = text.strip()
    try:
        if text.startswith("("):
            triples = []
            for chunk in text.split("+"):
                chunk = chunk.strip()
                if not (chunk.startswith("(") and chunk.endswith(")")):
                    raise ValueError
                triples.append(tuple(int(x) for x in chunk[1:-1].split(",")))
            return fock.FockVector.superposition(b, [(t, 1.0) for t in triples])
        occ = tuple(int(x) for x in text.split(","))
        return fock.FockVector.unit(b, occ)
    except (ValueError, KeyError):
        raise ConfigError(
            f"state: cannot parse {text!r} as an occupation triple or superposition "
            f"over basis(n={b.n})")


def emit_intensities(E_samples: np.ndarray):
    """Intensities I_j = |E_j|^2 and their renormalization.

    Rows with zero total intensity get NaN in the renormalized columns;
    the CSV writer renders those cells as empty markers.
    """
    E = np.asarray(E_samples, dtype=complex)
    I = np.abs(E) ** 2
    total = I.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        It = np.where(total > 0, I / total, np.nan)
    return I, It


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if math.isnan(f):
        return ""
    return format(f, ".17g")


def _render_csv(columns, rows, comments=()):
    lines = [f"# {','.join(columns)}"]
    lines += [f"# {c}" for c in comments]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _jsonable(v):
    if v is None:
        return None
    if isinstance(v, (bool, str, int)):
        return v
    if isinstance(v, (np.integer,)):
        return int(v)
    f = float(v)
    return None if math.isnan(f) else f


def _render_json(cfg, columns, rows, extras=None):
    doc = {
        "config": asdict(cfg),
        "columns": list(columns),
        "rows": [[_jsonable(v) for v in row] for row in rows],
    }
    if extras:
        doc.update(extras)
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _complex_cols(name: str):
    return [f"{name}_re", f"{name}_im"]


def _cjson(z: complex):
    return {"re": float(np.real(z)), "im": float(np.imag(z))}


# ---------------------------------------------------------------------------
# command implementations: each returns (columns, rows, extras, comments)

def _cmd_classify(cfg: RunConfig):
    M1 = _family(cfg).traceless(0.0)
    scale = np.linalg.norm(M1)
    inv = spectral.invariants(M1)
    delta = spectral.discriminant(inv)
    regime = spectral.classify(inv, scale, cfg.eps_ep)
    lams = spectral.cubic_roots(inv)
    columns = (["regime"] + _complex_cols("beta2") + _complex_cols("beta3")
               + _complex_cols("delta")
               + [c for j in range(3) for c in _complex_cols(f"lambda{j+1}")])
    row = [regime.value, inv.beta2.real, inv.beta2.imag, inv.beta3.real,
           inv.beta3.imag, delta.real, delta.imag]
    for lam in lams:
        row += [lam.real, lam.imag]
    extras = {"record": {
        "regime": regime.value, "beta2": _cjson(inv.beta2),
        "beta3": _cjson(inv.beta3), "delta": _cjson(delta),
        "lambdas": [_cjson(l) for l in lams],
    }}
    return columns, [row], extras, []


def _map_worker(args):
    template, x, y_values, eps = args
    _, make = _MAP_MAKERS[template]
    out = []
    for y in y_values:
        M1 = make(x, y).traceless(0.0)
        s = np.linalg.norm(M1)
        if s < eps:
            out.append((0.0, 0.0, spectral.Regime.ZERO_MATRIX.value))
            continue
        inv = spectral.invariants(M1)
        d = spectral.discriminant(inv)
        out.append((d.real, d.imag, spectral.classify(inv, s, eps).value))
    return out


_MAP_MAKERS = {name: (axes, make) for name, (axes, make) in families.MAP_TEMPLATES.items()}


def _cmd_map(cfg: RunConfig):
    x_lo, x_hi = cfg.range("kappa1", (0.0, 4.0))
    y_lo, y_hi = cfg.range("kappa2", (0.0, 4.0))
    x = np.linspace(x_lo, x_hi, cfg.samples)
    y = np.linspace(y_lo, y_hi, cfg.samples)
    axes, _ = _MAP_MAKERS[cfg.family]

    if cfg.jobs > 1:
        chunks = [(cfg.family, xv, y, cfg.eps_ep) for xv in x]
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_map_worker, chunks, chunksize=8))
        rows = []
        for i, xv in enumerate(x):
            for j, yv in enumerate(y):
                d_re, d_im, reg = results[i][j]
                rows.append([xv, yv, d_re, d_im, reg])
        loci = _map_loci(cfg, x, y)
    else:
        result = families.discriminant_map(cfg.family, x, y, eps=cfg.eps_ep)
        rows = [[xv, yv, d.real, d.imag, reg.value]
                for (xv, yv, d, reg) in result.records()]
        loci = [{"x": lx, "y": ly, "kind": kind} for (lx, ly, kind) in result.loci]

    columns = [axes[0], axes[1], "delta_re", "delta_im", "regime"]
    comments = [f"locus,{l['kind']},{_fmt(l['x'])},{_fmt(l['y'])}" for l in loci]
    return columns, rows, {"loci": loci}, comments


def _map_loci(cfg, x, y):
    result = families.discriminant_map(cfg.family, x, y, eps=cfg.eps_ep)
    return [{"x": lx, "y": ly, "kind": kind} for (lx, ly, kind) in result.loci]


def _cmd_propagate(cfg: RunConfig):
    fam = _family(cfg)
    E0 = _parse_classical_state(cfg.state)
    res = propagator.integrate_direct(fam, cfg.z_max, tol=cfg.tol,
                                      n_samples=cfg.samples)
    E = res.U @ E0
    I, It = emit_intensities(E)
    columns = ["z", "I1", "I2", "I3", "It1", "It2", "It3"]
    rows = [[z, *I[i], *It[i]] for i, z in enumerate(res.z_samples)]
    return columns, rows, {}, []


def _cmd_loop(cfg: RunConfig):
    spec = families.LoopSpec(r=cfg.loop_r, turns=cfg.loop_turns)
    fam = families.ep3_loop(spec, cfg.gamma)
    z_end = fam.z_domain[1]
    grid = np.linspace(0.0, z_end, max(cfg.samples, 64 * cfg.loop_turns))
    paths = spectral.track_branches(fam, grid, eps=cfg.eps_ep)

    zs = np.linspace(0.0, z_end, cfg.samples)
    if cfg.state.startswith("eig:"):
        try:
            j0 = int(cfg.state[4:]) - 1
            if j0 not in (0, 1, 2):
                raise ValueError
        except ValueError:
            raise ConfigError("state: eigenmode selector must be eig:1, eig:2, or eig:3")
        frame0 = spectral.local_frame(fam.traceless(0.0), 0.0, eps=cfg.eps_ep)
        E0 = frame0.right(j0)
    else:
        E0 = _parse_classical_state(cfg.state)
    res = propagator.integrate_direct(fam, z_end, tol=cfg.tol, z_eval=zs)
    E = res.U @ E0
    I, It = emit_intensities(E)

    # biorthogonal coefficients in the tracked instantaneous frame
    lam_interp = [np.interp(zs, paths.z, paths.lambdas[:, j].real)
                  + 1j * np.interp(zs, paths.z, paths.lambdas[:, j].imag)
                  for j in range(3)]
    cs = np.full((len(zs), 3), np.nan)
    for i, z in enumerate(zs):
        order = [lam_interp[j][i] for j in range(3)]
        try:
            fr = spectral.local_frame(fam.traceless(z), z, eps=cfg.eps_ep, order=order)
        except (TrimodeError, ValueError):
            continue   # too close to a crossing; cell stays empty
        cs[i] = np.abs(spectral.project_biorthogonal(fr, E[i])) ** 2

    k1 = fam.params["gamma"] * (families.EP3_CENTER
                                + cfg.loop_r * np.cos(2 * np.pi * fam.params["gamma"] * zs))
    k2 = fam.params["gamma"] * cfg.loop_r * np.sin(2 * np.pi * fam.params["gamma"] * zs)
    delta = [spectral.discriminant(spectral.invariants(fam.traceless(z))) for z in zs]

    columns = (["z", "kappa1", "kappa2", "delta_re", "delta_im"]
               + [c for j in range(3) for c in _complex_cols(f"lambda{j+1}")]
               + ["c1_abs2", "c2_abs2", "c3_abs2", "I1", "I2", "I3",
                  "It1", "It2", "It3"])
    rows = []
    for i, z in enumerate(zs):
        row = [z, k1[i], k2[i], delta[i].real, delta[i].imag]
        for j in range(3):
            row += [lam_interp[j][i].real, lam_interp[j][i].imag]
        row += list(cs[i]) + list(I[i]) + list(It[i])
        rows.append(row)

    events = [{"z": ev.z, "kind": ev.kind,
               "delta": None if not np.isfinite(np.real(ev.delta)) else _cjson(ev.delta)}
              for ev in paths.events]
    comments = [f"event,{ev['z']!r},{ev['kind']}" for ev in events]
    return columns, rows, {"events": events}, comments


def _cmd_fock(cfg: RunConfig):
    fam = _family(cfg)
    b = fock.basis(cfg.n)
    psi0 = _parse_fock_state(cfg.state, b)
    res = fock.propagate_fock(fam, cfg.n, psi0, cfg.z_max, tol=cfg.tol,
                              n_samples=cfg.samples)
    labels = ["".join(str(x) for x in s) for s in b.states]
    columns = (["z"] + [f"P_{l}" for l in labels] + [f"Pt_{l}" for l in labels])
    rows = []
    for i, z in enumerate(res.z_samples):
        P = np.abs(res.psi[i]) ** 2
        total = P.sum()
        Pt = P / total if total > 0 else np.full_like(P, np.nan)
        rows.append([z, *P, *Pt])
    return columns, rows, {"basis": [list(s) for s in b.states]}, []


def _cmd_holonomy(cfg: RunConfig):
    # loop of radius loop-r around center (kappa1, kappa2), in units of gamma
    g = cfg.gamma
    c1, c2 = cfg.scalar("kappa1"), cfg.scalar("kappa2")

    def k1(z):
        return g * (c1 + cfg.loop_r * math.cos(2 * math.pi * g * z))

    def k2(z):
        return g * (c2 + cfg.loop_r * math.sin(2 * math.pi * g * z))

    fam = families.pt_cyclic(g, k1, k2)
    steps = max(64, 4 * (cfg.samples // 4))
    res = propagator.holonomy(fam, steps=steps, eps=cfg.eps_ep,
                              loop=(0.0, 1.0 / g), convergence_check=True)
    columns = ["i", "j", "H_re", "H_im"]
    rows = [[i + 1, j + 1, res.matrix[i, j].real, res.matrix[i, j].imag]
            for i in range(3) for j in range(3)]
    extras = {
        "phi_I0": None if res.phi_I0 is None else _cjson(res.phi_I0),
        "phi_Y": None if res.phi_Y is None else _cjson(res.phi_Y),
        "steps": res.steps,
        "convergence_ratio": _jsonable(res.convergence_ratio),
        "det": _cjson(np.linalg.det(res.matrix)),
    }
    comments = [f"steps,{res.steps}",
                f"convergence_ratio,{_fmt(res.convergence_ratio)}"]
    if res.phi_I0 is not None:
        comments.append(f"phi_I0,{_fmt(res.phi_I0.real)},{_fmt(res.phi_I0.imag)}")
        comments.append(f"phi_Y,{_fmt(res.phi_Y.real)},{_fmt(res.phi_Y.imag)}")
    return columns, rows, extras, comments


def _cmd_find_ep(cfg: RunConfig):
    k1 = cfg.scalar("kappa1")
    bracket = cfg.range("kappa2", (0.01, 4.0))
    roots = families.find_ep2(k1, bracket, eps=cfg.eps_ep)
    columns = ["index", "kappa2", "delta_abs"]
    rows = []
    for i, r in enumerate(roots):
        M1 = families.pt_cyclic(1.0, k1, r).traceless(0.0)
        d = spectral.discriminant(spectral.invariants(M1))
        rows.append([i, r, abs(d)])
    return columns, rows, {"roots": [float(r) for r in roots]}, []


_DISPATCH = {
    "classify": _cmd_classify,
    "map": _cmd_map,
    "propagate": _cmd_propagate,
    "loop": _cmd_loop,
    "fock": _cmd_fock,
    "holonomy": _cmd_holonomy,
    "find-ep": _cmd_find_ep,
}


def _plot_script_text(out_path: str, columns) -> str:
    return f"""#!/usr/bin/env python3
# Auto-generated plotting companion for {os.path.basename(out_path)}
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

rows = []
with open({out_path!r}) as fh:
    for line in fh:
        if line.startswith("#") or not line.strip():
            continue
        rows.append([float(x) if x else np.nan for x in line.rstrip().split(",")])
data = np.array(rows, dtype=object)
columns = {list(columns)!r}
x = np.array([float(v) for v in data[:, 0]])
fig, ax = plt.subplots(figsize=(8, 5))
for k in range(1, data.shape[1]):
    try:
        y = np.array([float(v) for v in data[:, k]])
    except (TypeError, ValueError):
        continue
    ax.plot(x, y, label=columns[k])
ax.set_xlabel(columns[0])
ax.legend(fontsize=7, ncol=2)
fig.tight_layout()
fig.savefig({(out_path + ".png")!r}, dpi=150)
print("wrote", {(out_path + ".png")!r})
"""


def run(cfg: RunConfig) -> int:
    """Execute a validated config; returns the process exit code."""
    try:
        cfg.validate()
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    try:
        columns, rows, extras, comments = _DISPATCH[cfg.command](cfg)
        if cfg.format == "csv":
            text = _render_csv(columns, rows, comments)
        else:
            text = _render_json(cfg, columns, rows, extras)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (TrimodeError, ValueError, ArithmeticError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 3

    if cfg.out is None:
        sys.stdout.write(text)
    else:
        tmp = cfg.out + ".tmp"
        try:
            with open(tmp, "w") as fh:
                fh.write(text)
            os.replace(tmp, cfg.out)
        finally:
            if os.path.exists(tmp):
                os.unlink(tmp)
        if cfg.plot_script and cfg.format == "csv":
            with open(cfg.out + ".plot.py", "w") as fh:
                fh.write(_plot_script_text(cfg.out, columns))
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trimode",
        description="Non-Hermitian three-mode coupler runs with CSV/JSON output.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("classify", "spectral regime and invariants at one parameter point"),
        ("map", "discriminant sign and regime over a parameter grid"),
        ("propagate", "classical intensities along z"),
        ("loop", "branch tracking and dynamics around the EP3-centered loop"),
        ("fock", "fixed-excitation quantum amplitudes along z"),
        ("holonomy", "frame holonomy around a loop centered at (kappa1, kappa2)"),
        ("find-ep", "kappa2 roots of the discriminant at fixed kappa1"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--family", choices=FAMILIES)
        p.add_argument("--gamma", type=float)
        p.add_argument("--kappa1", help="number, or lo:hi range for map/find-ep")
        p.add_argument("--kappa2", help="number, or lo:hi range for map/find-ep")
        p.add_argument("--z-max", dest="z_max", type=float)
        p.add_argument("--samples", type=int)
        p.add_argument("--n", type=int, help="excitation number (fock)")
        p.add_argument("--state",
                       help="classical 'a,b,c', occupation 'n1,n2,n3', "
                            "superposition '(..)+(..)', or eig:j (loop)")
        p.add_argument("--loop-r", dest="loop_r", type=float)
        p.add_argument("--loop-turns", dest="loop_turns", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--out")
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--jobs", type=int)
        p.add_argument("--eps-ep", dest="eps_ep", type=float)
        p.add_argument("--plot-script", dest="plot_script", action="store_true",
                       default=None)
    return parser


def _config_from_args(args) -> RunConfig:
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = RunConfig.from_json(fh.read())
        except OSError as err:
            raise ConfigError(f"config file: {err}")
        if cfg.command != args.command:
            cfg.command = args.command
    else:
        cfg = RunConfig(command=args.command)
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        v = getattr(args, f.name, None)
        if v is not None:
            setattr(cfg, f.name, v)
    # defaults that depend on the command
    if args.config is None:
        if args.command == "fock" and getattr(args, "state", None) is None:
            cfg.state = ",".join(str(x) for x in (cfg.n, 0, 0))
        if args.command == "loop" and getattr(args, "state", None) is None:
            cfg.state = "eig:1"
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return 2 if err.code not in (0, None) else 0
    try:
        cfg = _config_from_args(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
