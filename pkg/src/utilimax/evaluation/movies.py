"""The multi-objective movie recommendation task: its diagram and per-user task text."""

from __future__ import annotations

from ..diagram import Domain, Factor, InfluenceDiagram, NodeKind, NodeSpec
from ..prompts import TaskSpec
from .data import EligibilityCriteria, UserTask

TASK_DESCRIPTION = "recommend movies to a user based on the movies they have already rated"


def movie_diagram(genres: tuple[str, ...] = ("Comedy", "Romance")) -> InfluenceDiagram:
    """Predicted score S times one binary indicator per required genre, all children of the answer."""
    nodes = [
        NodeSpec("A", NodeKind.DECISION, description="the recommended movie"),
        NodeSpec(
            "S",
            NodeKind.CHANCE,
            Domain.CATEGORICAL,
            "the rating from 1 to 5 that the user would give the movie",
            Factor.SCORE_MAP,
            labels=("1", "2", "3", "4", "5"),
            scores=(1.0, 2.0, 3.0, 4.0, 5.0),
        ),
    ]
    for i, genre in enumerate(genres, start=1):
        nodes.append(
            NodeSpec(
                f"G{i}",
                NodeKind.CHANCE,
                Domain.BINARY,
                f"the movie belongs to the {genre.lower()} genre",
                Factor.IDENTITY,
            )
        )
    edges = tuple(("A", n.id) for n in nodes[1:])
    return InfluenceDiagram(tuple(nodes), edges, task=TASK_DESCRIPTION)


def _genre_phrase(genres: tuple[str, ...]) -> str:
    names = [g.lower() for g in genres]
    return names[0] if len(names) == 1 else ", ".join(names[:-1]) + " and " + names[-1]


def movie_task_spec(task: UserTask, k: int = 10, c: EligibilityCriteria | None = None) -> TaskSpec:
    c = c or EligibilityCriteria()
    genres = _genre_phrase(c.required_genres)
    history = "\n".join(f"- {title}: {rating}" for _, title, rating in task.train)
    pool = "\n".join(f"- {movie_id}: {title}" for movie_id, title in task.candidates)
    context = (
        f"The user has rated the following {len(task.train)} movies from 1 to 5, in the order they watched them:\n"
        f"{history}\n\n"
        f"Candidate movies (id: title):\n{pool}"
    )
    return TaskSpec(
        description=TASK_DESCRIPTION,
        context=context,
        candidate_instruction=(
            f"Recommend the top {k} movies for this user from the {len(task.candidates)} candidate movies "
            "listed below, referring to each movie by its id."
        ),
        top_k=k,
        basic_preference=f"The user is in the mood for {genres} movies.",
        harsh_preference=(
            f"The user is only interested in {genres} movies. "
            "You should not suggest anything outside of these genres."
        ),
    )
