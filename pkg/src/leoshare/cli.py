"""Command-line front end: ``leoshare {design-codebook,track,simulate,analyze}``.

Exit codes: 0 success, 1 usage or configuration error, 2 domain error
(infeasible codeword, TLE parse failure, missing run manifest).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import os
import sys

from . import __version__
from .codebook import InfeasibleCodeword, build_codebook_tensor, tensor_from_text, tensor_to_text
from .config import ConfigError, RunConfig, load_config
from .ephemeris import TleError, bundled_constellation_text, parse_tle, track_all, tracks_to_csv, TRACK_CSV_HEADER
from .scenario import Simulation, analyze, read_run, write_run

log = logging.getLogger("leoshare")

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2
CODEBOOK_REPORT_HEADER = ("l", "i", "steer_el", "steer_az", "gain_loss", "max_sidelobe", "k_star")


class DomainError(Exception):
    pass


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, seed=args.seed))
    return cfg


def _threads(args) -> int:
    return args.threads if args.threads else (os.cpu_count() or 1)


def _design_tensor(cfg: RunConfig, threads: int):
    spec = cfg.codebook
    return build_codebook_tensor(spec.n_partitions, spec.steering(), spec.epsilon(), spec.geometry(),
                                 spec.sampling(), spec.aux_partitions, threads)


def cmd_design_codebook(args) -> int:
    cfg = _config(args)
    try:
        tensor = _design_tensor(cfg, _threads(args))
    except InfeasibleCodeword as exc:
        raise DomainError(f"infeasible codeword: {exc}") from exc
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "codebook.txt"), "w") as fh:
        fh.write(tensor_to_text(tensor))
    dirs = tensor.steering.directions()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CODEBOOK_REPORT_HEADER)
    for l in range(tensor.n_partitions):
        for i, d in enumerate(dirs):
            m = tensor.meta[(l, i)]
            w.writerow([l, i, repr(d.elevation_deg), repr(d.azimuth_deg), repr(m["gain_loss"]),
                        repr(m["max_sidelobe_up"]), m["k_star"]])
    with open(os.path.join(args.out, "codebook_report.csv"), "w", newline="") as fh:
        fh.write(buf.getvalue())
    log.info("wrote %d codewords to %s", tensor.n_partitions * tensor.n_columns, args.out)
    return EXIT_OK


def _load_tles(cfg: RunConfig, tle_arg: str | None):
    path = tle_arg or cfg.resolve(cfg.tle_path)
    if path is None:
        text = bundled_constellation_text()
    else:
        if not os.path.isfile(path):
            raise ConfigError(f"TLE file not found: {path}")
        with open(path) as fh:
            text = fh.read()
    try:
        return parse_tle(text)
    except TleError as exc:
        raise DomainError(f"{path or 'bundled TLE'}: {exc}") from exc


def cmd_track(args) -> int:
    cfg = _config(args)
    records = _load_tles(cfg, args.tle)
    tracks = track_all(records, cfg.station, cfg.sim.times())
    text = tracks_to_csv(tracks)
    # append a visibility column against the configured minimum elevation
    rows = list(csv.reader(io.StringIO(text)))
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(list(TRACK_CSV_HEADER) + ["visible"])
    for row in rows[1:]:
        w.writerow(row + [int(float(row[2]) >= cfg.sim.min_elevation_deg)])
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "tracks.csv"), "w", newline="") as fh:
        fh.write(out.getvalue())
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    sim = dataclasses.replace(cfg.sim, threads=_threads(args))
    tensor = None
    if sim.codebook:
        path = cfg.resolve(cfg.codebook.tensor_path)
        if path:
            with open(path) as fh:
                tensor = tensor_from_text(fh.read())
        else:
            try:
                tensor = _design_tensor(cfg, _threads(args))
            except InfeasibleCodeword as exc:
                raise DomainError(f"infeasible codeword: {exc}") from exc
    records = _load_tles(cfg, args.tle)
    tracks = track_all(records, cfg.station, sim.times())
    try:
        metrics = Simulation(sim, cfg.deployment, tracks, cfg.link, cfg.channels(), tensor).run()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    write_run(metrics, args.out, cfg.to_dict(), sim.seed)
    log.info("wrote %d INR samples to %s", len(metrics.inr), args.out)
    return EXIT_OK


def cmd_analyze(args) -> int:
    try:
        metrics, _ = read_run(args.input)
    except FileNotFoundError as exc:
        raise DomainError(str(exc)) from exc
    analyze(metrics, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="leoshare", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, tle=False):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--seed", type=int, help="override sim.seed")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
        if tle:
            sp.add_argument("--tle", help="TLE file (default: bundled sample constellation)")

    common(sub.add_parser("design-codebook", help="build a null-steering codebook tensor"))
    common(sub.add_parser("track", help="write satellite tracks for the ground station"), tle=True)
    common(sub.add_parser("simulate", help="run the Monte-Carlo coexistence scenario"), tle=True)
    a = sub.add_parser("analyze", help="CDF tables and summaries for a finished run")
    a.add_argument("--in", dest="input", required=True, help="run directory written by simulate")
    a.add_argument("--out", required=True)
    return p


_COMMANDS = {
    "design-codebook": cmd_design_codebook,
    "track": cmd_track,
    "simulate": cmd_simulate,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
