"""All the action we need during build"""

import os
import pathlib
from typing import List

import nox  # pylint: disable=import-error

TESTS = "nodal_blowup/tests"


def _check_files(names: List[str]) -> None:
    root_dir = pathlib.Path(__file__).parent
    for name in names:
        file_path = root_dir / name
        lines: List[str] = file_path.read_text().splitlines()
        if any(line for line in lines if line.startswith("# TODO:")):
            raise Exception(f"Please update {os.fspath(file_path)}.")


def _install(session: nox.Session) -> None:
    session.install("-r", "./requirements.txt")
    session.install("-r", f"{TESTS}/requirements-test.txt")
    session.install("-e", ".")


@nox.session()
def tests(session: nox.Session) -> None:
    """Runs the unit, integration and CLI tests (slow sweeps excluded)."""
    _install(session)
    session.run("pytest", TESTS, "-m", "not slow", "--cov=nodal_blowup", *session.posargs)


@nox.session()
def slow(session: nox.Session) -> None:
    """Runs the eps-sweep trend tests."""
    _install(session)
    session.run("pytest", TESTS, "-m", "slow", *session.posargs)


@nox.session()
def verify(session: nox.Session) -> None:
    """Runs the verification suite through the CLI."""
    _install(session)
    session.run("nbl", "verify", *session.posargs)


@nox.session()
def lint(session: nox.Session) -> None:
    """Runs linter and formatter checks on python files."""
    _install(session)

    session.install("pylint")
    session.run("pylint", "-d", "W0511", "./nodal_blowup")
    session.run("pylint", "-d", "W0511", "noxfile.py")

    # check formatting using black
    session.install("black")
    session.run("black", "--check", "--line-length", "120", "./nodal_blowup")
    session.run("black", "--check", "noxfile.py")

    # check import sorting using isort
    session.install("isort")
    session.run("isort", "--check", "./nodal_blowup")
    session.run("isort", "--check", "noxfile.py")


@nox.session()
def build_package(session: nox.Session) -> None:
    """Builds the source distribution and wheel."""
    _check_files(["README.md", "CHANGELOG.md"])
    session.install("build")
    session.run("python", "-m", "build")
