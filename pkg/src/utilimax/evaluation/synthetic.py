"""Deterministic miniature MovieLens-format bundle for offline end-to-end runs.

``build_mini_bundle`` writes ``ratings.dat``, ``movies.dat``, a mock-provider
fixture with one scripted response per (user, variant) prompt, and a config
that ties them together. The copy shipped in ``utilimax/data/mini`` is produced
by this module and regenerating it must give identical bytes.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from ..prompts import Variant, compile_prompt
from ..responses import RESPONSE_TAG
from .data import EligibilityCriteria, build_user_task, load_movies, load_ratings
from .movies import movie_diagram, movie_task_spec

SEED = 20240611
N_MOVIES = 220
K = 10

# user id -> (history length, positives placed in the candidate window)
USERS = {
    1: (150, 8),
    2: (175, 6),
    3: (160, 5),
    4: (190, 9),
    5: (152, 7),
    6: (168, 5),
    7: (149, 8),  # one rating short of the history threshold
    8: (200, 4),  # one positive short of the window threshold
}

_GENRE_POOL = [
    ("Comedy", "Romance"),
    ("Comedy", "Romance", "Drama"),
    ("Comedy",),
    ("Romance",),
    ("Romance", "Drama"),
    ("Comedy", "Drama"),
    ("Drama",),
    ("Action", "Thriller"),
    ("Horror",),
    ("Sci-Fi", "Adventure"),
    ("Animation", "Children's", "Comedy"),
    ("Documentary",),
]

_ACCENTED = {7: "Café au Lait", 19: "Amélie", 42: "La Cité des Enfants Perdus", 88: "Señorita Extraviada"}


def _movies(rng: random.Random) -> list[tuple[int, str, tuple[str, ...]]]:
    out = []
    for movie_id in range(1, N_MOVIES + 1):
        genres = _GENRE_POOL[rng.randrange(len(_GENRE_POOL))]
        name = _ACCENTED.get(movie_id, f"Synthetic Feature {movie_id}")
        out.append((movie_id, f"{name} ({1950 + rng.randrange(50)})", genres))
    return out


def _is_match(genres: tuple[str, ...]) -> bool:
    return "Comedy" in genres and "Romance" in genres


def _user_history(rng: random.Random, movies, length: int, positives: int) -> list[tuple[int, int]]:
    """(movie_id, rating) pairs in watch order with exactly ``positives`` matches rated 4+ in positions 101-150."""
    matches = [m for m in movies if _is_match(m[2])]
    others = [m for m in movies if not _is_match(m[2])]
    window_hits = rng.sample(matches, positives)
    rest_matches = [m for m in matches if m not in window_hits]
    window_fill = rng.sample(others, 50 - positives)
    remaining = [m for m in others if m not in window_fill] + rest_matches
    rng.shuffle(remaining)
    before = remaining[:100]
    after = remaining[100 : 100 + length - 150]

    def rate(movie, in_window_hit: bool) -> int:
        if in_window_hit:
            return rng.choice((4, 5))
        if _is_match(movie[2]):
            return rng.choice((1, 2, 3))  # keep extra window matches below the positive threshold
        return rng.choice((1, 2, 3, 3, 4, 4, 5))

    window = [(m, True) for m in window_hits] + [(m, False) for m in window_fill]
    rng.shuffle(window)
    history = [(m[0], rate(m, False)) for m in before]
    history += [(m[0], rate(m, hit)) for m, hit in window]
    history += [(m[0], rate(m, False)) for m in after]
    return history[:length]


def _utilitymax_response(rng: random.Random, task, movies_by_id, style: str) -> str:
    ratings = dict(task.candidate_ratings)
    candidates = []
    for movie_id, _ in task.candidates:
        genres = movies_by_id[movie_id].genres
        s = min(5.0, max(1.0, ratings[movie_id] + rng.choice((-0.5, 0.0, 0.0, 0.5))))
        g1 = 0.92 if "Comedy" in genres else 0.08
        g2 = 0.9 if "Romance" in genres else 0.1
        objective = round(s * g1 * g2, 4)
        candidates.append({"id": str(movie_id), "estimates": {"S": s, "G1": g1, "G2": g2}, "objective": objective})
    ranked = sorted(candidates, key=lambda c: (-c["estimates"]["S"] * c["estimates"]["G1"] * c["estimates"]["G2"], c["id"]))
    answer = [c["id"] for c in ranked[:K]]
    if style == "drift":
        ranked[0]["objective"] = round(ranked[0]["objective"] * 1.25, 4)
    elif style == "mismatch":
        answer[0], answer[1] = answer[1], answer[0]
    block = json.dumps({"candidates": candidates, "answer": answer})
    return (
        "I evaluated every candidate movie and computed O(a) for each.\n\n"
        f"```{RESPONSE_TAG}\n{block}\n```\n"
    )


def _baseline_response(rng: random.Random, task, movies_by_id, variant: Variant, style: str) -> str:
    if style == "garbled":
        return "Here are some great picks: the first five comedies on the list, plus a couple of romances."
    ratings = dict(task.candidate_ratings)

    def score(movie_id: int) -> float:
        genres = movies_by_id[movie_id].genres
        fit = ("Comedy" in genres) + ("Romance" in genres)
        taste = ratings[movie_id] / 5.0 if variant is Variant.BASIC else 0.2
        return fit + taste + rng.random() * 2.5

    ranked = sorted((movie_id for movie_id, _ in task.candidates), key=lambda m: (-score(m), m))
    block = json.dumps({"answer": [str(m) for m in ranked[:K]]})
    return f"```{RESPONSE_TAG}\n{block}\n```\n"


CONFIG = {
    "data": {"ratings": "ratings.dat", "movies": "movies.dat"},
    "provider": {
        "provider_name": "mock",
        "model_id": "mock-frontier",
        "fixture_path": "mock_responses.json",
        "max_retries": 2,
        "max_parallel": 4,
        "backoff_base": 0.0,
    },
    "seed": 7,
    "users": 5,
    "runs": 3,
    "variants": ["utilitymax", "basic", "harsh"],
    "k": K,
    "std_over": "users",
    "gain": "binary",
}

# per-user quirks in the scripted responses, so the audit and failure paths get exercised
_STYLES = {(2, Variant.UTILITYMAX): "drift", (3, Variant.UTILITYMAX): "mismatch", (4, Variant.HARSH): "garbled"}


def build_mini_bundle(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    movies = _movies(rng)
    movie_lines = [f"{mid}::{title}::{'|'.join(genres)}" for mid, title, genres in movies]
    # movies.dat in the 1M release is Latin-1, not UTF-8
    (out / "movies.dat").write_bytes(("\n".join(movie_lines) + "\n").encode("latin-1"))

    rating_lines = []
    for user_id, (length, positives) in USERS.items():
        t0 = 978_000_000 + user_id * 1_000_000
        for pos, (movie_id, rating) in enumerate(_user_history(rng, movies, length, positives)):
            # occasional shared timestamps exercise the movie-id tie-break
            step = pos - 1 if pos % 17 == 0 and pos else pos
            rating_lines.append(f"{user_id}::{movie_id}::{rating}::{t0 + 60 * step}")
    (out / "ratings.dat").write_text("\n".join(rating_lines) + "\n", encoding="ascii")

    ratings = load_ratings(out / "ratings.dat")
    movie_records = load_movies(out / "movies.dat")
    by_id = {m.movie_id: m for m in movie_records}
    criteria = EligibilityCriteria()
    diagram = movie_diagram()
    scripts: dict[str, str] = {}
    for user_id in USERS:
        if USERS[user_id][0] < criteria.min_history or USERS[user_id][1] < criteria.min_positive_in_window:
            continue
        task = build_user_task(user_id, ratings, movie_records, criteria)
        spec = movie_task_spec(task, K, criteria)
        for variant in Variant:
            prompt = compile_prompt(spec, diagram, variant)
            style = _STYLES.get((user_id, variant), "plain")
            if variant is Variant.UTILITYMAX:
                scripts[prompt.fingerprint] = _utilitymax_response(rng, task, by_id, style)
            else:
                scripts[prompt.fingerprint] = _baseline_response(rng, task, by_id, variant, style)

    (out / "mock_responses.json").write_text(json.dumps(scripts, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    (out / "config.json").write_text(json.dumps(CONFIG, indent=2) + "\n", encoding="utf-8")
    return out


def bundled_mini_dir() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "mini"


if __name__ == "__main__":
    print(build_mini_bundle(bundled_mini_dir()))
