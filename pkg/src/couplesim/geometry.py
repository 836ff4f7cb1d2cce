"""Integer lattice geometry: face directions, the 24 cube rotations, joint yaw."""

from __future__ import annotations

from itertools import permutations, product

Vec = tuple[int, int, int]

# Local face names in canonical order; keys for Module.faces and scenario files.
FACE_NAMES = ("+x", "-x", "+y", "-y", "+z", "-z")

DIRECTIONS: dict[str, Vec] = {
    "+x": (1, 0, 0), "-x": (-1, 0, 0),
    "+y": (0, 1, 0), "-y": (0, -1, 0),
    "+z": (0, 0, 1), "-z": (0, 0, -1),
}

_NAME_OF: dict[Vec, str] = {v: k for k, v in DIRECTIONS.items()}

# One fixed in-plane reference tangent per local face (perpendicular to its
# normal); the yaw of a joint is the quarter-turn between the two mated
# faces' world tangents about the joint axis.
FACE_TANGENTS: dict[str, Vec] = {
    "+x": (0, 1, 0), "-x": (0, 1, 0),
    "+y": (0, 0, 1), "-y": (0, 0, 1),
    "+z": (1, 0, 0), "-z": (1, 0, 0),
}


def opposite(face_name: str) -> str:
    return ("-" if face_name[0] == "+" else "+") + face_name[1]


def add(a: Vec, b: Vec) -> Vec:
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def sub(a: Vec, b: Vec) -> Vec:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def neg(a: Vec) -> Vec:
    return (-a[0], -a[1], -a[2])


Mat = tuple[Vec, Vec, Vec]  # row-major 3x3


def _det(m: Mat) -> int:
    return (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))


def _all_rotations() -> tuple[Mat, ...]:
    mats = []
    for perm in permutations(range(3)):
        for signs in product((1, -1), repeat=3):
            rows = []
            for i in range(3):
                row = [0, 0, 0]
                row[perm[i]] = signs[i]
                rows.append(tuple(row))
            m = tuple(rows)
            if _det(m) == 1:
                mats.append(m)
    identity = ((1, 0, 0), (0, 1, 0), (0, 0, 1))
    mats.remove(identity)
    mats.sort()
    return (identity, *mats)


# The 24 proper cube rotations; index 0 is the identity and scenario files
# reference orientations by index into this fixed ordering.
ROTATIONS: tuple[Mat, ...] = _all_rotations()


def rotate(orientation: int, v: Vec) -> Vec:
    m = ROTATIONS[orientation]
    return (
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    )


def face_world_normal(orientation: int, face_name: str) -> Vec:
    return rotate(orientation, DIRECTIONS[face_name])


def world_face_map(orientation: int) -> dict[str, str]:
    """Map world direction name -> local face name pointing that way."""
    return {_NAME_OF[face_world_normal(orientation, f)]: f for f in FACE_NAMES}


def _cross(a: Vec, b: Vec) -> Vec:
    return (a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0])


def _dot(a: Vec, b: Vec) -> int:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def relative_yaw(orientation_a: int, face_a: str, orientation_b: int, face_b: str) -> int:
    """Quarter-turn angle (0/90/180/270) between two mated faces' tangents.

    Both faces must oppose along the joint axis; the angle is measured from
    face B's world tangent to face A's, about face A's outward normal.
    """
    axis = face_world_normal(orientation_a, face_a)
    if face_world_normal(orientation_b, face_b) != neg(axis):
        raise ValueError("faces do not oppose; no joint axis")
    ta = rotate(orientation_a, FACE_TANGENTS[face_a])
    tb = rotate(orientation_b, FACE_TANGENTS[face_b])
    cos = _dot(ta, tb)
    sin = _dot(axis, _cross(tb, ta))
    return {(1, 0): 0, (0, 1): 90, (-1, 0): 180, (0, -1): 270}[(cos, sin)]
