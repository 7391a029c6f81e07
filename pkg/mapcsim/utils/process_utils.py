from __future__ import absolute_import

import logging
import os

NS_PER_US = 1000
NS_PER_MS = 1000 * 1000
NS_PER_S = 1000 * 1000 * 1000

env_nproc = "MAPCSIM_NPROC"
env_log_level = "MAPCSIM_LOG_LEVEL"


def display_args(args):
    arg_vars = vars(args)
    print("# ===============================================")
    print("## parameters: ")
    for arg_key in arg_vars.keys():
        if arg_key != 'func':
            print("{}:\n\t{}".format(arg_key, arg_vars[arg_key]))
    print("# ===============================================")


def us_to_ns(t_us):
    return int(round(t_us * NS_PER_US))


def ms_to_ns(t_ms):
    return int(round(t_ms * NS_PER_MS))


def ns_to_us(t_ns):
    return t_ns / float(NS_PER_US)


def parse_seeds(seeds_str):
    """
    parse a seed list given on the command line.
    "3" -> [3], "1..5" -> [1, 2, 3, 4, 5] (inclusive), "1,4,9" -> [1, 4, 9]
    :param seeds_str:
    :return: list of int
    """
    seeds_str = seeds_str.strip()
    if ".." in seeds_str:
        first, last = seeds_str.split("..")
        first, last = int(first), int(last)
        if last < first:
            raise ValueError("bad seed range {}, the end is before the start".format(seeds_str))
        return list(range(first, last + 1))
    seeds = [int(x) for x in seeds_str.split(",") if x.strip() != ""]
    if len(seeds) == 0:
        raise ValueError("empty seed list")
    return seeds


def nproc_from_env(default=1):
    value = os.environ.get(env_nproc)
    if value is None or value.strip() == "":
        return default
    nproc = int(value)
    if nproc < 1:
        raise ValueError("{} must be >= 1, got {}".format(env_nproc, value))
    return nproc


def setup_logging(verbose=False, quiet=False):
    if verbose:
        level = logging.DEBUG
    elif quiet:
        level = logging.WARNING
    else:
        level = getattr(logging, os.environ.get(env_log_level, "INFO").upper(), logging.INFO)
    logging.basicConfig(level=level,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

