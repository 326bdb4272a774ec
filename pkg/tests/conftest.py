import json
from pathlib import Path

import pytest

from mrsync.cli import data_path
from mrsync.env import load_partition
from mrsync.ltl import parse
from mrsync.planner import TeamRun
from mrsync.syncreduce import labels_from_partition


@pytest.fixture(scope="session")
def case_env():
    return load_partition(data_path("case_study_env.json"))


@pytest.fixture(scope="session")
def case_phi():
    return parse(data_path("case_study.ltl").read_text())


@pytest.fixture(scope="session")
def case_run():
    return TeamRun.from_json(data_path("case_study_run.json"))


@pytest.fixture(scope="session")
def case_labels(case_env):
    return labels_from_partition(case_env)


@pytest.fixture(scope="session")
def two_env():
    return load_partition(data_path("two_robot_env.json"))


@pytest.fixture(scope="session")
def two_phi():
    return parse(data_path("two_robot.ltl").read_text())


@pytest.fixture
def small_run():
    # two robots; robot 2 repeats its cell inside the suffix
    return TeamRun((("c5", "c6"),), (("c1", "c2"), ("c7", "c2"), ("c3", "c4")))


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", help="also run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow; pass --runslow to include")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
