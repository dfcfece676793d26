"""Region mini-language and the standard candidate families."""
import ast
import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from scipy.spatial import cKDTree

from app.models.domain import PointCloudSpace, RegionSet
from app.services.errors import InputError
from app.services.separating_service import SeparatingService
from app.services.space_service import MetricSpaceService, as_mask

logger = logging.getLogger(__name__)

REGION_CALLS = ("ball", "halfspace", "levelset", "union", "file")


class RegionParser:
    """Evaluate region expressions such as ``union(ball(0.2, 0.5, 0.1), halfspace(1, 0, 0.8))``.

    ``ball(c1, ..., cd, r)`` is the open metric ball around the vertex
    nearest to c; ``halfspace(n1, ..., nd, b)`` is {z : n.z <= b};
    ``levelset(name, t)`` is {pos_A <= t} for the named region A;
    ``file(path)`` reads whitespace-separated vertex ids.
    """

    def __init__(self, space: PointCloudSpace, separating: Optional[SeparatingService] = None,
                 named: Optional[Dict[str, RegionSet]] = None, base_dir: Optional[Path] = None):
        self.space = space
        self.separating = separating
        self.named = dict(named or {})
        self.base_dir = Path(base_dir) if base_dir else Path.cwd()
        self._tree = cKDTree(space.coords)

    def parse(self, expression: str, label: Optional[str] = None) -> RegionSet:
        try:
            tree = ast.parse(expression.strip(), mode="eval")
        except SyntaxError as exc:
            raise InputError(f"malformed region expression '{expression}': {exc.msg}") from None
        mask = self._eval(tree.body, expression)
        return RegionSet(mask=mask, label=label or expression)

    def parse_all(self, expressions: Dict[str, str]) -> Dict[str, RegionSet]:
        """Parse named expressions in order; later ones may reference earlier names."""
        for name, expression in expressions.items():
            self.named[name] = self.parse(expression, label=name)
        return dict(self.named)

    def _number(self, node: ast.AST, expression: str) -> float:
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            value = self._number(node.operand, expression)
            return -value if isinstance(node.op, ast.USub) else value
        raise InputError(f"expected a number in '{expression}'")

    def _string(self, node: ast.AST, expression: str) -> str:
        if isinstance(node, ast.Constant) and isinstance(node.value, str):
            return node.value
        if isinstance(node, ast.Name):
            return node.id
        raise InputError(f"expected a name in '{expression}'")

    def _eval(self, node: ast.AST, expression: str) -> np.ndarray:
        if not isinstance(node, ast.Call) or not isinstance(node.func, ast.Name) or node.keywords:
            raise InputError(f"'{expression}' is not a region call")
        name, args = node.func.id, node.args
        if name not in REGION_CALLS:
            raise InputError(f"unknown region function '{name}' in '{expression}'")
        dim = self.space.dim

        if name == "ball":
            values = [self._number(a, expression) for a in args]
            if len(values) != dim + 1 or values[-1] <= 0:
                raise InputError(f"ball needs {dim} coordinates and a positive radius")
            _, center = self._tree.query(values[:-1])
            return as_mask(self.space, MetricSpaceService.ball(self.space, int(center), values[-1]))

        if name == "halfspace":
            values = [self._number(a, expression) for a in args]
            if len(values) != dim + 1:
                raise InputError(f"halfspace needs {dim} normal entries and an offset")
            return self.space.coords @ np.asarray(values[:-1]) <= values[-1]

        if name == "levelset":
            if len(args) != 2:
                raise InputError("levelset takes a region name and a level")
            ref, t = self._string(args[0], expression), self._number(args[1], expression)
            if ref not in self.named:
                raise InputError(f"levelset refers to unknown region '{ref}'")
            if self.separating is None:
                raise InputError("levelset needs poles")
            return self.separating.position_function(self.named[ref]).values <= t

        if name == "union":
            mask = np.zeros(self.space.n, dtype=bool)
            for arg in args:
                mask |= self._eval(arg, expression)
            return mask

        if len(args) != 1:
            raise InputError("file takes one path")
        path = self.base_dir / self._string(args[0], expression)
        try:
            ids = np.loadtxt(path, dtype=np.int64, comments="#", ndmin=1)
        except (OSError, ValueError) as exc:
            raise InputError(f"cannot read vertex list '{path}': {exc}") from None
        return as_mask(self.space, ids)


def standard_candidates(
    separating: SeparatingService,
    seed: int,
    n_blobs: int = 50,
    offsets: int = 5,
) -> List[RegionSet]:
    """Balls on a coarse net, coordinate half-spaces, level sets of pos_X and random blob unions."""
    space = separating.space
    x, y, dxy = separating.x, separating.y, separating.distance
    rng = np.random.default_rng(seed)
    candidates: List[RegionSet] = []

    radii = [r for r in 2.0 * space.h * 2.0 ** np.arange(32) if r <= dxy / 2]
    centers = MetricSpaceService.delta_net(space, dxy / 4, x, y) if dxy / 4 > 0 else np.array([x, y])
    support = space.distances_from(x) < separating.riesz.radius
    for c in centers:
        if not support[c]:
            continue
        for r in radii:
            mask = space.distances_from(int(c)) < r
            candidates.append(RegionSet(mask=mask, label=f"ball({int(c)},{r:.6g})"))

    px, py = space.coords[x], space.coords[y]
    for axis in range(space.dim):
        lo, hi = sorted((px[axis], py[axis]))
        if hi - lo < space.h:
            continue
        for c in np.linspace(lo, hi, offsets + 2)[1:-1]:
            coord = space.coords[:, axis]
            candidates.append(RegionSet(mask=coord <= c, label=f"halfspace(axis={axis},<={c:.6g})"))
            candidates.append(RegionSet(mask=coord >= c, label=f"halfspace(axis={axis},>={c:.6g})"))

    everything = RegionSet(mask=np.ones(space.n, dtype=bool), label="X")
    pos = separating.position_function(everything)
    for frac in (0.25, 0.5, 0.75):
        t = frac * pos.width
        candidates.append(RegionSet(mask=pos.values <= t, label=f"levelset(X,{t:.6g})"))

    pool = np.flatnonzero(support)
    r_lo, r_hi = 2.0 * space.h, max(2.0 * space.h, dxy / 2)
    for k in range(n_blobs):
        mask = np.zeros(space.n, dtype=bool)
        for c in rng.choice(pool, size=int(rng.integers(1, 5)), replace=True):
            mask |= space.distances_from(int(c)) < rng.uniform(r_lo, r_hi)
        candidates.append(RegionSet(mask=mask, label=f"blob{k}"))

    logger.debug(f"standard candidate family: {len(candidates)} regions")
    return candidates
