"""Command-line entry point: ``treextract <subcommand> ...``.

Exit codes: 0 success, 1 runtime or attack failure, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import attack as attack_mod
from . import tree as tree_mod
from .data import (fit_schema, load_dataset, load_dataset_with_schema, load_schema,
                   read_samples, split, synth_tree_dataset, write_dataset, write_schema)
from .evaluation import (EvalReport, SweepConfig, accuracy, r_test, run_experiment,
                         write_results)
from .exceptions import TreeXtractError, ValidationError
from .explain import (ExplainerConfig, build_discretizer, discretizer_from_dict,
                      discretizer_to_dict)
from .service import LocalOracle, RemoteOracle, ServiceConfig, serve

log = logging.getLogger("treextract")


def discretizer_path(model_path) -> Path:
    """Sidecar file holding the explainer's discretizer: ``m.json`` -> ``m.discretizer.json``."""
    return Path(model_path).with_suffix(".discretizer.json")


def _write_json(path, doc):
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _load_model_bundle(model_path, schema_path, discretizer=None):
    schema = load_schema(schema_path)
    model = tree_mod.load(model_path, schema)
    disc_file = Path(discretizer) if discretizer else discretizer_path(model_path)
    if not disc_file.exists():
        raise ValidationError(f"discretizer file not found: {disc_file}")
    disc = discretizer_from_dict(json.loads(disc_file.read_text(encoding="utf-8")), schema)
    return schema, model, disc


def cmd_train(args):
    schema, data = load_dataset(args.data, args.schema)
    train = data
    if args.train_fraction is not None:
        train, test = split(data, args.train_fraction, args.seed)
        if args.out_test:
            write_dataset(args.out_test, schema, test)
    schema = fit_schema(schema, train)
    params = tree_mod.TreeParams(args.max_depth, args.min_samples_split, args.seed)
    model = tree_mod.fit(train, schema, params)
    model.schema_ref = Path(args.schema).name
    tree_mod.save(model, args.out)
    _write_json(discretizer_path(args.out), discretizer_to_dict(build_discretizer(train, schema)))
    print(json.dumps(model.describe()))


def cmd_serve(args):
    schema, model, disc = _load_model_bundle(args.model, args.schema, args.discretizer)
    explainer = ExplainerConfig(num_perturbations=args.num_perturbations, rng_seed=args.seed)
    config = ServiceConfig(args.port, args.pricing, explainer, args.model)
    handle = serve(model, disc, config, host=args.host)
    print(f"serving {args.model} on {handle.url} (pricing={config.pricing})", flush=True)
    try:
        handle._thread.join()
    except KeyboardInterrupt:
        pass
    finally:
        handle.close()


def cmd_attack(args):
    schema = load_schema(args.schema)
    if args.target_model:
        schema, model, disc = _load_model_bundle(args.target_model, args.schema)
        oracle = LocalOracle(model, disc,
                             ExplainerConfig(num_perturbations=args.num_perturbations,
                                             rng_seed=args.seed), args.pricing)
        params = model.params
    else:
        oracle = RemoteOracle(args.target_url)
        params = tree_mod.TreeParams()
    params = replace(params,
                     max_depth=args.max_depth or params.max_depth,
                     min_samples_split=args.min_samples_split or params.min_samples_split)
    seeds = read_samples(args.seeds, schema) if args.seeds else []
    config = attack_mod.AttackConfig(args.lb, args.ub, args.epsilon, args.integer_step,
                                     args.discipline, args.max_queries, args.seed)
    surrogate, trace = attack_mod.extract(oracle, seeds, schema, params, config)
    surrogate.schema_ref = Path(args.schema).name
    if args.out_surrogate:
        tree_mod.save(surrogate, args.out_surrogate)
    if args.out_trace:
        attack_mod.write_trace(args.out_trace, trace, schema)
    print(json.dumps({"queries": trace.queries, "seed_queries": trace.seed_queries,
                      "visited": len(trace.visited), "n_visits": trace.n_visits,
                      "stop_reason": trace.stop_reason, "error": trace.error}))
    return 1 if trace.error else 0


def cmd_eval(args):
    schema = load_schema(args.schema)
    target = tree_mod.load(args.target, schema)
    surrogate = tree_mod.load(args.surrogate, schema)
    if target.schema_ref and surrogate.schema_ref and target.schema_ref != surrogate.schema_ref:
        raise ValidationError(f"schema mismatch: target uses {target.schema_ref!r}, "
                              f"surrogate uses {surrogate.schema_ref!r}")
    _, test = load_dataset_with_schema(args.data, schema)
    report = EvalReport(accuracy(target, test), accuracy(surrogate, test),
                        r_test(target, surrogate, test), args.queries,
                        repetition_seed=args.seed)
    print(json.dumps(report.to_dict()))


def cmd_experiment(args):
    config = SweepConfig.load(args.config)
    if args.seed is not None:
        config.base_seed = args.seed
    if args.workers:
        config.workers = args.workers
    rows = run_experiment(config)
    write_results(rows, args.out)
    errors = [r for r in rows if str(r[-1]).startswith("error")]
    print(f"wrote {len(rows)} rows to {args.out} ({len(errors)} failed cells)")
    return 1 if errors else 0


def cmd_synth(args):
    tree, schema, data = synth_tree_dataset(args.depth, args.features, args.domain,
                                            args.seed, args.classes)
    schema_out = Path(args.out_schema) if args.out_schema else Path(args.out_data).with_suffix(".schema.json")
    write_schema(schema_out, schema)
    write_dataset(args.out_data, schema, data)
    tree.schema_ref = schema_out.name
    tree_mod.save(tree, args.out_model)
    _write_json(discretizer_path(args.out_model), discretizer_to_dict(build_discretizer(data, schema)))
    print(json.dumps({**tree.describe(), "samples": len(data), "schema": str(schema_out)}))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treextract", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a target tree and write model JSON")
    t.add_argument("--data", required=True)
    t.add_argument("--schema", required=True)
    t.add_argument("--max-depth", type=int, default=8)
    t.add_argument("--min-samples-split", type=int, default=2)
    t.add_argument("--train-fraction", type=float)
    t.add_argument("--out-test", help="write the held-out split here (needs --train-fraction)")
    t.add_argument("--out", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("serve", help="serve a model over HTTP")
    s.add_argument("--model", required=True)
    s.add_argument("--schema", required=True)
    s.add_argument("--discretizer")
    s.add_argument("--port", type=int, default=8080)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--pricing", choices=["per_call", "per_internal"], default="per_call")
    s.add_argument("--num-perturbations", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_serve)

    a = sub.add_parser("attack", help="extract a surrogate from a served or local model")
    target = a.add_mutually_exclusive_group(required=True)
    target.add_argument("--target-url")
    target.add_argument("--target-model")
    a.add_argument("--schema", required=True)
    a.add_argument("--seeds")
    a.add_argument("--lb", type=int, default=1)
    a.add_argument("--ub", type=int, default=100)
    a.add_argument("--max-queries", type=int, default=1000)
    a.add_argument("--epsilon", type=float)
    a.add_argument("--integer-step", type=int, default=1)
    a.add_argument("--discipline", choices=["lifo", "fifo"], default="lifo")
    a.add_argument("--max-depth", type=int)
    a.add_argument("--min-samples-split", type=int)
    a.add_argument("--pricing", choices=["per_call", "per_internal"], default="per_call")
    a.add_argument("--num-perturbations", type=int, default=1000)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out-surrogate")
    a.add_argument("--out-trace")
    a.set_defaults(func=cmd_attack)

    e = sub.add_parser("eval", help="compare target and surrogate on a test CSV")
    e.add_argument("--target", required=True)
    e.add_argument("--surrogate", required=True)
    e.add_argument("--schema", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--queries", type=int, default=0)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    x = sub.add_parser("experiment", help="run a seed-count x budget sweep")
    x.add_argument("--config", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--workers", type=int)
    x.add_argument("--seed", type=int, help="override the config's base seed")
    x.set_defaults(func=cmd_experiment)

    y = sub.add_parser("synth", help="generate a random integer-domain tree and its full domain")
    y.add_argument("--depth", type=int, required=True)
    y.add_argument("--features", type=int, required=True)
    y.add_argument("--domain", type=int, required=True)
    y.add_argument("--classes", type=int, default=2)
    y.add_argument("--seed", type=int, default=0)
    y.add_argument("--out-model", required=True)
    y.add_argument("--out-data", required=True)
    y.add_argument("--out-schema")
    y.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or 0
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TreeXtractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
