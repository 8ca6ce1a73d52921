"""`nak` command line: experiments, oracles, constructions, dimensions, element tools.

Exit status is 0 when every verdict passes, 1 when any verdict fails and 2 on
a configuration or input error.
"""

import argparse
import ast
import json
import operator
import sys
from fractions import Fraction

from . import experiments as xp
from .errors import InvalidConfiguration, InvalidInput, InvalidSchedule, NakError
from .exceptional import MoranSchedule
from .field import FieldSpec, LocalFieldElement, element_from_json, from_fraction, hensel_sqrt, parse_element

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


# ----- argument helpers -----------------------------------------------------

def _levels(text):
    try:
        out = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad level list {text!r}")
    if not out:
        raise argparse.ArgumentTypeError("empty level list")
    return out


def _fractions(text):
    try:
        return [Fraction(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad rational list {text!r}")


def _global_flags(parser, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    g = parser.add_argument_group("global options")
    g.add_argument("--p", type=int, default=d(None), help="residue characteristic")
    g.add_argument("--char", type=int, default=d(None),
                   help="field characteristic: 0 for Q_p, p for F_p((t))")
    g.add_argument("--seed", type=int, default=d(0), help="master seed")
    g.add_argument("--json", dest="json_path", default=d(None), metavar="PATH",
                   help="write the JSON report here ('-' for stdout)")
    g.add_argument("--csv", dest="csv_path", default=d(None), metavar="PATH",
                   help="write frequency tables as CSV here")
    g.add_argument("--precision", type=int, default=d(None), help="working precision in digits")


def _field(args, default_p, default_char_p=False):
    p = args.p if args.p is not None else default_p
    ch = args.char
    if ch is None:
        ch = p if default_char_p else 0
    if ch not in (0, p):
        raise InvalidConfiguration(f"--char must be 0 or p = {p}")
    return FieldSpec(ch, p)


def _coef(text, spec):
    """A rational such as 3/2, or an element in canonical text form."""
    if text is None:
        return 1
    text = text.strip()
    if text.startswith(("Qp{", "Fpt{")):
        el = parse_element(text)
        if el.spec != spec:
            raise InvalidConfiguration("coefficient lives in a different field")
        return el
    try:
        return Fraction(text)
    except ValueError:
        raise InvalidConfiguration(f"cannot read coefficient {text!r}")


# ----- verbs -------------------------------------------------------------

def cmd_ud(args):
    spec = _field(args, 5)
    cfg = xp.ExperimentConfig(
        spec, generator=args.generator, coef=_coef(args.coef, spec),
        x_source="explicit" if args.x else "random", x_radius=args.radius,
        x_explicit=args.x, digits=args.digits or args.precision, N=args.N, levels=args.levels,
        filter=args.filter, K=args.K, seed=args.seed, trials=args.trials)
    return xp.run_koksma(cfg)


def cmd_charp(args):
    spec = _field(args, 2, default_char_p=True)
    cfg = xp.ExperimentConfig(
        spec, coef=_coef(args.coef, spec),
        x_source="explicit" if args.x else "random", x_radius=args.radius,
        x_explicit=args.x, digits=args.digits or args.precision, N=args.N, levels=args.levels,
        measure="mu_star", K=args.K, seed=args.seed, trials=args.trials)
    return xp.run_char_p(cfg, hull_level=args.hull_level, subseq_level=args.subseq_level)


def cmd_oracle(args):
    p = args.p if args.p is not None else 3
    char = args.char if args.char is not None else 0
    return xp.run_oracles(p, args.max_lambda, args.seed, args.specs, char, args.max_lambda_g)


def cmd_construct(args):
    kw = {"p": args.p}
    for key in ("K", "H", "L", "alpha", "z_norm_exp", "tau", "delta_exp", "count", "eta", "eps"):
        v = getattr(args, key)
        if v is not None:
            kw[key] = v
    prec = args.precision or 64
    rep, x, cert = xp.run_construct(args.name, prec, args.exhaustive_depth, **kw)
    rep.summary = [f"x = {x.to_text()}",
                   f"certificate: {len(cert.rows)} rows, {'PASS' if cert.passed else 'FAIL'}",
                   f"branch levels below {prec}: {rep.body['branch_levels']['levels'] or 'none'}"]
    if "exhaustive" in rep.body:
        e = rep.body["exhaustive"]
        rep.summary.append(f"depth-{e['depth']} prefixes surviving: {e['survivors']}")
    return rep


def load_schedule(path):
    """A schedule file is JSON with H0, first and either lambdas/Hs lists or lambda_rule/H_rule strings."""
    with open(path) as fh:
        obj = json.load(fh)
    return schedule_from_json(obj)


def schedule_from_json(obj):
    H0 = int(obj.get("H0", 0))
    first = int(obj.get("first", 1))
    targets = obj.get("targets", 0)
    if isinstance(targets, dict) and "random" in targets:
        targets = ("random", int(targets["random"]))
    if "lambda_rule" in obj:
        return MoranSchedule.from_rules(obj["lambda_rule"], obj["H_rule"], H0, first, targets)
    if "lambdas" in obj and "Hs" in obj:
        return MoranSchedule(H0, [int(v) for v in obj["lambdas"]], [int(v) for v in obj["Hs"]], targets, first)
    raise InvalidSchedule("schedule needs lambda_rule/H_rule or lambdas/Hs")


def cmd_dim(args):
    case = args.case
    if case == "prop61":
        kw = {"p": args.p or 3, "K": args.K, "H": args.H, "L": args.L}
    elif case == "prop71":
        kw = {"eta": args.eta, "eps": args.eps}
    elif case == "prop72":
        kw = {"q": args.q, "z_norm": args.z_norm, "tau": args.tau}
    elif case == "freq":
        if args.P is None:
            raise InvalidConfiguration("freq needs --P")
        kw = {"m": args.m, "rho": args.rho, "P": args.P}
    else:
        if args.schedule_file:
            sched = load_schedule(args.schedule_file)
        elif args.lam and args.Hrule:
            sched = MoranSchedule.from_rules(args.lam, args.Hrule, args.H0, args.first)
        else:
            raise InvalidConfiguration("gamma needs --schedule-file or both --lam and --H-rule")
        kw = {"schedule": sched, "horizon": args.horizon, "q": args.q}
    rep, val = xp.run_dim(case, **kw)
    if case == "gamma":
        g = val
        rep.summary = [f"tail min = {float(g.tail_min):.12g}",
                       f"limit = {g.limit if g.limit is not None else 'unknown'}"]
    else:
        rep.summary = [_fmt_value(val)]
    return rep


def _fmt_value(v):
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        dec = v.numerator / v.denominator
        return f"{dec:.12g}" if Fraction(dec) == v else f"{v} ({dec:.12g})"
    return f"{float(v):.12g}"


def cmd_pisot(args):
    p = args.p if args.p is not None else 3
    rep, rows = xp.run_pisot(p, args.k, args.l, args.n_max, args.precision, args.disc_n)
    rep.summary = [f"n0 = {rep.body['n0']}"]
    return rep


# ----- element tools ----------------------------------------------------------

_BIN = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}


def eval_expression(text, spec, prec):
    """Evaluate +, -, *, /, integer powers, sqrt(.) and the prime element `pi` (or `t`) in spec."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError:
        raise InvalidInput(f"cannot parse expression {text!r}")

    def lift(v):
        if isinstance(v, LocalFieldElement):
            return v
        return from_fraction(Fraction(v), spec, prec)

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int):
            return Fraction(node.value)
        if isinstance(node, ast.Name) and node.id in ("pi", "t"):
            if node.id == "t" and not spec.char_p:
                raise InvalidInput("t is the prime element of F_p((t)); use pi in Q_p")
            return spec.pi(prec + 1)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BIN:
            a, b = ev(node.left), ev(node.right)
            if isinstance(a, Fraction) and isinstance(b, Fraction):
                if isinstance(node.op, ast.Div) and b == 0:
                    raise InvalidInput("division by zero")
                return _BIN[type(node.op)](a, b)
            return _BIN[type(node.op)](lift(a), lift(b))
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Pow):
            e = ev(node.right)
            if not (isinstance(e, Fraction) and e.denominator == 1):
                raise InvalidInput("exponents must be integers")
            base = ev(node.left)
            if isinstance(base, Fraction) and e >= 0:
                return base ** int(e)
            return lift(base) ** int(e)
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id == "sqrt" and len(node.args) == 1):
            return hensel_sqrt(lift(ev(node.args[0])))
        raise InvalidInput(f"unsupported expression element: {ast.dump(node)}")

    return lift(ev(tree))


def _element_arg(text):
    text = text.strip()
    if text.startswith("{"):
        return element_from_json(text)
    return parse_element(text)


def cmd_element(args):
    if args.action in ("parse", "format"):
        el = _element_arg(args.value)
    else:
        spec = _field(args, 5)
        el = eval_expression(args.value, spec, args.precision or 20)
    out = {"text": el.to_text(), "json": el.to_json(),
           "valuation": None if el.is_zero() else el.valuation,
           "abs_precision": el.abs_precision}
    if args.action == "format":
        lines = [el.to_text()]
    elif args.action == "parse":
        lines = [json.dumps(el.to_json())]
    else:
        lines = [el.to_text()]
    return out, lines


# ----- parser and entry point -----------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="nak", description="Local-field sequence experiments.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="verb", required=True)

    def verb(name, helptext):
        sp = sub.add_parser(name, help=helptext, description=helptext)
        _global_flags(sp, suppress=True)
        return sp

    def x_options(sp, N):
        sp.add_argument("--coef", "--alpha", dest="coef", default=None,
                        help="alpha (power map) or beta (geometric map); rational or element text")
        sp.add_argument("--x", default=None, help="explicit x in canonical text form")
        sp.add_argument("--radius", type=int, default=1, help="random x has |x| = q^radius")
        sp.add_argument("--digits", type=int, default=None, help="digits of random x")
        sp.add_argument("--N", type=int, default=N)
        sp.add_argument("--levels", type=_levels, default=[1, 2])
        sp.add_argument("--K", type=int, default=1)
        sp.add_argument("--trials", type=int, default=1)

    sp = verb("ud", "Uniform distribution of [alpha x^n] or [beta^n x] against Haar measure.")
    x_options(sp, 100000)
    sp.add_argument("--generator", choices=["power", "geometric"], default="power")
    sp.add_argument("--filter", choices=list(xp.FILTERS), default="all")
    sp.set_defaults(func=cmd_ud)

    sp = verb("charp", "Hull frequency, mu_K and mu* statistics of [x^n] in F_p((t)).")
    x_options(sp, 100000)
    sp.add_argument("--hull-level", type=int, default=4)
    sp.add_argument("--subseq-level", type=int, default=2)
    sp.set_defaults(func=cmd_charp)

    sp = verb("oracle", "Exact enumeration oracles for affine scaling maps.")
    sp.add_argument("--max-lambda", type=int, default=3)
    sp.add_argument("--max-lambda-g", type=int, default=2)
    sp.add_argument("--specs", type=int, default=20, help="random maps per lambda")
    sp.set_defaults(func=cmd_oracle)

    sp = verb("construct", "Build an exceptional point and its membership certificate.")
    sp.add_argument("name", choices=["mahler", "prop61", "prop71", "prop72"])
    sp.add_argument("--exhaustive-depth", type=int, default=None)
    for flag, typ in (("--K", int), ("--H", int), ("--L", int), ("--alpha", Fraction),
                      ("--z-norm-exp", int), ("--tau", Fraction), ("--delta-exp", int),
                      ("--count", int), ("--eta", Fraction), ("--eps", Fraction)):
        sp.add_argument(flag, type=typ, default=None)
    sp.set_defaults(func=cmd_construct)

    sp = verb("dim", "Hausdorff dimension formulas and schedule dimension estimates.")
    sp.add_argument("case", choices=["prop61", "prop71", "prop72", "freq", "gamma"])
    sp.add_argument("--K", type=int, default=1)
    sp.add_argument("--H", type=int, default=1)
    sp.add_argument("--L", type=int, default=6)
    sp.add_argument("--eta", type=Fraction, default=Fraction(1, 2))
    sp.add_argument("--eps", type=Fraction, default=Fraction(1, 10))
    sp.add_argument("--q", type=int, default=2)
    sp.add_argument("--z-norm", type=Fraction, default=None)
    sp.add_argument("--tau", type=Fraction, default=None)
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--rho", type=Fraction, default=Fraction(1, 2))
    sp.add_argument("--P", type=_fractions, default=None, help="comma separated probabilities")
    sp.add_argument("--lam", default=None, help="lambda rule in n, e.g. '2n'")
    sp.add_argument("--H-rule", dest="Hrule", default=None, help="H rule in n, e.g. '1'")
    sp.add_argument("--H0", type=int, default=0)
    sp.add_argument("--first", type=int, default=1)
    sp.add_argument("--schedule-file", default=None)
    sp.add_argument("--horizon", type=int, default=1000)
    sp.set_defaults(func=cmd_dim)

    sp = verb("pisot", "Limit points of [xi^n] for a quadratic Pisot-Chabauty number.")
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--l", type=int, default=1)
    sp.add_argument("--n-max", type=int, default=40)
    sp.add_argument("--disc-n", type=int, default=200)
    sp.set_defaults(func=cmd_pisot)

    sp = verb("element", "Parse, evaluate or format field elements.")
    sp.add_argument("action", choices=["parse", "eval", "format"])
    sp.add_argument("value", help="element text, element JSON, or an expression for eval")
    sp.set_defaults(func=cmd_element)
    return parser


def _write(path, text):
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "element":
            out, lines = cmd_element(args)
            for line in lines:
                print(line)
            if args.json_path:
                _write(args.json_path, json.dumps(out, indent=2) + "\n")
            return EXIT_OK
        if args.verb == "dim" and args.case == "prop72" and (args.z_norm is None or args.tau is None):
            raise InvalidConfiguration("prop72 needs --z-norm and --tau")
        rep = args.func(args)
    except (InvalidConfiguration, InvalidInput, InvalidSchedule, ValueError) as e:
        print(f"nak: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NakError as e:
        print(f"nak: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_FAIL
    for line in getattr(rep, "summary", []):
        print(line)
    for v in rep.verdicts:
        state = "n/a" if v.get("pass") is None else ("PASS" if v["pass"] else "FAIL")
        print(f"{v['name']}: {state}")
    if rep.verdicts:
        print(f"overall: {'PASS' if rep.passed else 'FAIL'}")
    if args.json_path:
        _write(args.json_path, json.dumps(rep.to_json(), indent=2) + "\n")
    if args.csv_path:
        _write(args.csv_path, rep.to_csv())
    return EXIT_OK if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
