import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from reachdiff.graph import Graph
from reachdiff.schemes import DISTANCE, REACH, Draw

settings.register_profile("repo", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


def random_instance(rng, mode, max_nodes=12, max_edges=30, ties=False):
    """Random multigraph with a random draw; ``ties`` uses small integer values and infinities."""
    n = int(rng.integers(2, max_nodes + 1))
    E = int(rng.integers(1, max_edges + 1))
    g = Graph.from_edges(n, rng.integers(0, n, E), rng.integers(0, n, E))
    if ties:
        ev = rng.integers(1, 4, E).astype(float)
        nv = rng.integers(1, 4, n).astype(float)
        if mode == REACH:
            ev[rng.random(E) < 0.3] = np.inf
            nv[rng.random(n) < 0.5] = np.inf
        else:
            nv[rng.random(n) < 0.5] = 0.0
    else:
        ev = rng.exponential(1.0, E)
        nv = rng.exponential(1.0, n)
        nv[rng.random(n) < 0.5] = np.inf if mode == REACH else 0.0
    return g, Draw(mode, ev, nv, 0)


@st.composite
def instances(draw, max_nodes=10, max_edges=24, modes=(REACH, DISTANCE)):
    seed = draw(st.integers(0, 2**32 - 1))
    mode = draw(st.sampled_from(modes))
    ties = draw(st.booleans())
    return random_instance(np.random.default_rng(seed), mode, max_nodes, max_edges, ties)


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


@pytest.fixture
def tiny_movielens(tmp_path):
    """Four movies, three users; movie 40 has no genres, movie 50 is never rated."""
    ratings = write(tmp_path, "ratings.dat", "\n".join([
        "1::10::5::100", "1::20::3::101", "2::20::4::102",
        "2::30::1::103", "3::30::2::104", "3::40::5::105",
    ]) + "\n")
    movies = write(tmp_path, "movies.dat", "\n".join([
        "10::A (1999)::Comedy|Drama", "20::B (1999)::Action",
        "30::C (2000)::Drama", "40::D (2001)::", "50::E (2002)::Horror",
    ]) + "\n")
    return ratings, movies


def synthetic_movielens(tmp_path, n_movies=60, n_users=40, ratings_per_user=8, seed=0):
    """Random ratings with genres correlated to user taste, in the 1M file layout."""
    from reachdiff.graph import MOVIELENS_GENRES

    rng = np.random.default_rng(seed)
    genre_of = rng.integers(0, 4, n_movies)
    lines = []
    for u in range(1, n_users + 1):
        taste = rng.integers(0, 4)
        pref = np.where(genre_of == taste, 4.0, 1.0)
        movies = rng.choice(n_movies, ratings_per_user, replace=False, p=pref / pref.sum())
        lines += [f"{u}::{m + 1}::4::{1000 + u}" for m in movies]
    ratings = write(tmp_path, "ratings.dat", "\n".join(lines) + "\n")
    mlines = []
    for m in range(n_movies):
        gs = [MOVIELENS_GENRES[genre_of[m]]]
        if rng.random() < 0.3:
            gs.append(MOVIELENS_GENRES[4 + rng.integers(0, 3)])
        mlines.append(f"{m + 1}::Movie {m + 1} (2000)::{'|'.join(gs)}")
    movies = write(tmp_path, "movies.dat", "\n".join(mlines) + "\n")
    return ratings, movies


ACCEPTANCE = []


def record(criterion, ok, detail):
    """Store one acceptance line; ``ok=None`` marks an informational line."""
    tag = "INFO" if ok is None else ("PASS" if ok else "FAIL")
    ACCEPTANCE.append((criterion, tag, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, tag, detail in sorted(ACCEPTANCE, key=lambda r: (r[0], r[1] == "INFO")):
        terminalreporter.write_line(f"criterion {criterion}: {tag}  {detail}")
