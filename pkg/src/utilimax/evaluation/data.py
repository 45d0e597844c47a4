"""MovieLens 1M ingestion, user eligibility and per-user task construction."""

from __future__ import annotations

import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator


class MovieLensFormatError(ValueError):
    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


class NotEnoughUsersError(ValueError):
    pass


@dataclass(frozen=True)
class RatingEvent:
    user_id: int
    movie_id: int
    rating: int
    timestamp: int


@dataclass(frozen=True)
class MovieRecord:
    movie_id: int
    title: str
    genres: frozenset[str]


@dataclass(frozen=True)
class EligibilityCriteria:
    min_history: int = 150
    min_positive_in_window: int = 5
    train_size: int = 100
    candidate_size: int = 50
    min_rating: int = 4
    required_genres: tuple[str, ...] = ("Comedy", "Romance")

    def __post_init__(self) -> None:
        if self.min_history < self.train_size + self.candidate_size:
            raise ValueError("min_history must cover the train and candidate windows")


@dataclass(frozen=True)
class UserTask:
    user_id: int
    train: tuple[tuple[int, str, int], ...]  # (movie_id, title, rating)
    candidates: tuple[tuple[int, str], ...]  # (movie_id, title)
    relevant: frozenset[int]
    candidate_ratings: tuple[tuple[int, int], ...] = ()


def _lines(path) -> Iterator[tuple[int, str]]:
    """Yield (line number, text); lines that are not UTF-8 are read as Latin-1, as the 1M release needs."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    for lineno, raw in enumerate(path.read_bytes().splitlines(), start=1):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError:
            text = raw.decode("latin-1")
        if text.strip():
            yield lineno, text


def parse_rating_row(line: str, lineno: int = 0, path="<string>") -> RatingEvent:
    parts = line.strip().split("::")
    if len(parts) != 4:
        raise MovieLensFormatError(path, lineno, f"expected 4 fields, got {len(parts)}")
    try:
        user_id, movie_id, rating, timestamp = (int(p) for p in parts)
    except ValueError:
        raise MovieLensFormatError(path, lineno, "non-integer field") from None
    if rating not in (1, 2, 3, 4, 5):
        raise MovieLensFormatError(path, lineno, f"rating {rating} outside 1-5")
    return RatingEvent(user_id, movie_id, rating, timestamp)


def parse_movie_row(line: str, lineno: int = 0, path="<string>") -> MovieRecord:
    parts = line.rstrip("\r\n").split("::")
    if len(parts) != 3:
        raise MovieLensFormatError(path, lineno, f"expected 3 fields, got {len(parts)}")
    try:
        movie_id = int(parts[0])
    except ValueError:
        raise MovieLensFormatError(path, lineno, "non-integer movie id") from None
    genres = frozenset(g for g in parts[2].split("|") if g)
    if not genres:
        raise MovieLensFormatError(path, lineno, "movie has no genres")
    return MovieRecord(movie_id, parts[1], genres)


def load_ratings(path) -> list[RatingEvent]:
    return [parse_rating_row(text, lineno, path) for lineno, text in _lines(path)]


def load_movies(path) -> list[MovieRecord]:
    return [parse_movie_row(text, lineno, path) for lineno, text in _lines(path)]


def histories(ratings: Iterable[RatingEvent]) -> dict[int, list[RatingEvent]]:
    """Per-user watch history ordered by timestamp, ties by movie id."""
    by_user: dict[int, list[RatingEvent]] = defaultdict(list)
    for r in ratings:
        by_user[r.user_id].append(r)
    for events in by_user.values():
        events.sort(key=lambda r: (r.timestamp, r.movie_id))
    return dict(by_user)


def is_positive(event: RatingEvent, movie: MovieRecord, c: EligibilityCriteria) -> bool:
    return event.rating >= c.min_rating and all(g in movie.genres for g in c.required_genres)


def _movie_index(movies: Iterable[MovieRecord]) -> dict[int, MovieRecord]:
    return {m.movie_id: m for m in movies}


def eligible_users(ratings, movies, c: EligibilityCriteria) -> list[int]:
    index = _movie_index(movies)
    window = slice(c.train_size, c.train_size + c.candidate_size)
    out = []
    for user_id, events in sorted(histories(ratings).items()):
        if len(events) < c.min_history:
            continue
        positives = sum(1 for e in events[window] if e.movie_id in index and is_positive(e, index[e.movie_id], c))
        if positives >= c.min_positive_in_window:
            out.append(user_id)
    return out


def select_eligible_users(ratings, movies, c: EligibilityCriteria, sample_size: int, seed: int) -> list[int]:
    pool = eligible_users(ratings, movies, c)
    if len(pool) < sample_size:
        raise NotEnoughUsersError(f"only {len(pool)} eligible users, {sample_size} requested")
    return random.Random(seed).sample(pool, sample_size)


def build_user_task(user_id: int, ratings, movies, c: EligibilityCriteria | None = None) -> UserTask:
    c = c or EligibilityCriteria()
    index = _movie_index(movies)
    events = histories(ratings).get(user_id, [])
    needed = c.train_size + c.candidate_size
    if len(events) < needed:
        raise ValueError(f"user {user_id} has {len(events)} ratings; {needed} needed")
    missing = [e.movie_id for e in events[:needed] if e.movie_id not in index]
    if missing:
        raise ValueError(f"unknown movie id(s) in history of user {user_id}: {missing[:5]}")
    train_events, cand_events = events[: c.train_size], events[c.train_size : needed]
    return UserTask(
        user_id=user_id,
        train=tuple((e.movie_id, index[e.movie_id].title, e.rating) for e in train_events),
        candidates=tuple((e.movie_id, index[e.movie_id].title) for e in cand_events),
        relevant=frozenset(e.movie_id for e in cand_events if is_positive(e, index[e.movie_id], c)),
        candidate_ratings=tuple((e.movie_id, e.rating) for e in cand_events),
    )
