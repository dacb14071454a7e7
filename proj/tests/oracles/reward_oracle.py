"""Independent reference for the three task reward functions.

Replays hand-built scenes with scripted joint actions and writes
tests/data/reward_scenes.json (scene, actions, expected per-step rewards).
Scenes whose geometry comes within TIE of any threshold are rejected so the
frozen values do not depend on last-bit rounding.
"""
import json
import math
import pathlib

DT = 0.1
SPEED = 1.0
ROBOT_R = 0.3
COLLIDE = 0.5
TIE = 1e-9
HORIZON = 500

PAIRS = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]


class TieError(Exception):
    pass


def check(d, thr):
    if abs(d - thr) < TIE:
        raise TieError(f"distance {d!r} ties threshold {thr}")


def dist(a, b):
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)


def clamp(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def move(pos, act, w, h, obstacles):
    a = (clamp(act[0], -1, 1), clamp(act[1], -1, 1))
    prop = (pos[0] + a[0] * SPEED * DT, pos[1] + a[1] * SPEED * DT)
    for (cx, cy, r) in obstacles:
        d = dist(prop, (cx, cy))
        check(d, r + ROBOT_R)
        if d < r + ROBOT_R:
            return pos
    return (clamp(prop[0], 0, w), clamp(prop[1], 0, h))


class Team:
    def __init__(self, scene):
        self.w, self.h = scene["width"], scene["height"]
        self.obstacles = [tuple(o) for o in scene["obstacles"]]
        self.pos = [tuple(p) for p in scene["robots"]]
        self.close = [self.pair_close(a, b) for a, b in PAIRS]
        self.t = 0

    def pair_close(self, a, b):
        d = dist(self.pos[a], self.pos[b])
        check(d, COLLIDE)
        return d < COLLIDE

    def advance(self, actions):
        self.pos = [move(p, a, self.w, self.h, self.obstacles) for p, a in zip(self.pos, actions)]
        self.t += 1
        new = 0
        for k, (a, b) in enumerate(PAIRS):
            c = self.pair_close(a, b)
            if c and not self.close[k]:
                new += 1
            self.close[k] = c
        return new


def warehouse(scene):
    team = Team(scene)
    pk = [dict(pos=tuple(p), carrier=-1, delivered=False) for p in scene["packages"]]
    carrying = list(scene.get("carrying", [-1] * 4))
    for i, k in enumerate(carrying):
        if k >= 0:
            pk[k]["carrier"] = i
            pk[k]["pos"] = team.pos[i]
    zones = [tuple(z) for z in scene["drop_zones"]]
    delivered = 0
    rewards = []
    for act in scene["actions"]:
        coll = team.advance(act)
        for i, k in enumerate(carrying):
            if k >= 0:
                pk[k]["pos"] = team.pos[i]
        dels = picks = 0
        for i in range(4):
            p = team.pos[i]
            if carrying[i] >= 0:
                ds = [dist(p, z) for z in zones]
                for d in ds:
                    check(d, 1.0)
                if min(ds) <= 1.0:
                    k = carrying[i]
                    pk[k]["delivered"] = True
                    pk[k]["carrier"] = -1
                    carrying[i] = -1
                    dels += 1
            else:
                best, kbest = None, -1
                for k, q in enumerate(pk):
                    if q["carrier"] >= 0 or q["delivered"]:
                        continue
                    d = dist(p, q["pos"])
                    check(d, 0.5)
                    if d <= 0.5 and (best is None or d < best):
                        best, kbest = d, k
                if kbest >= 0:
                    pk[kbest]["carrier"] = i
                    pk[kbest]["pos"] = p
                    carrying[i] = kbest
                    picks += 1
        delivered += dels
        shaping = 0.0
        for i in range(4):
            p = team.pos[i]
            if carrying[i] >= 0:
                targets = zones
            else:
                targets = [q["pos"] for q in pk if q["carrier"] < 0 and not q["delivered"]]
            d = min((dist(p, q) for q in targets), default=20.0)
            shaping += 20.0 - d
        rewards.append(-0.1 + 100.0 * dels + 1.0 * picks - 10.0 * coll + 0.01 * shaping)
        if delivered >= 2 or team.t >= HORIZON:
            break
    return rewards


class Grid:
    def __init__(self, w, h, nx, ny):
        self.nx, self.ny = nx, ny
        self.cw, self.ch = w / nx, h / ny
        self.cells = set()

    def mark(self, p, radius, own_cell):
        for iy in range(self.ny):
            for ix in range(self.nx):
                c = ((ix + 0.5) * self.cw, (iy + 0.5) * self.ch)
                d = dist(c, p)
                check(d, radius)
                if d <= radius:
                    self.cells.add((ix, iy))
        if own_cell:
            ix = min(max(int(p[0] / self.cw), 0), self.nx - 1)
            iy = min(max(int(p[1] / self.ch), 0), self.ny - 1)
            self.cells.add((ix, iy))

    def coverage(self):
        return len(self.cells) / (self.nx * self.ny)


def search_rescue(scene):
    team = Team(scene)
    victims = [dict(pos=tuple(v), health=1.0, found=False, rescued=False) for v in scene["victims"]]
    grid = Grid(team.w, team.h, 10, 10)
    rescued = 0
    rewards = []
    for act in scene["actions"]:
        team.advance(act)
        for p in team.pos:
            grid.mark(p, 1.5, True)
        nf = nr = 0
        bonus = 0.0
        for v in victims:
            if v["rescued"]:
                continue
            near = min(dist(p, v["pos"]) for p in team.pos)
            check(near, 1.0)
            check(near, 0.5)
            if not v["found"] and near <= 1.0:
                v["found"] = True
                nf += 1
            if v["found"] and near <= 0.5:
                v["rescued"] = True
                nr += 1
                bonus += v["health"]
        for v in victims:
            if not v["rescued"]:
                v["health"] = max(0.0, v["health"] - 0.002)
        rescued += nr
        rewards.append(-0.1 + 5.0 * nf + 20.0 * nr + 0.1 * bonus + 0.5 * grid.coverage())
        if rescued >= 2 or team.t >= HORIZON:
            break
    return rewards


def mapping(scene):
    team = Team(scene)
    grid = Grid(team.w, team.h, 40, 40)
    rewards = []
    for act in scene["actions"]:
        team.advance(act)
        before = grid.coverage()
        for p in team.pos:
            grid.mark(p, 2.0, False)
        cov = grid.coverage()
        cx = sum(p[0] for p in team.pos) / 4
        cy = sum(p[1] for p in team.pos) / 4
        spread = sum(dist(p, (cx, cy)) for p in team.pos) / 4
        rewards.append(-0.1 + 10.0 * cov + 50.0 * (cov - before) + 0.5 * spread)
        if cov >= 0.75 or team.t >= HORIZON:
            break
    return rewards


SHELVES = [[fx * 20.0, fy * 20.0, 1.0] for fy in (0.35, 0.65) for fx in (0.3, 0.5, 0.7)]
ZONES = [[1.0, 10.0], [19.0, 10.0]]


def constant(per_robot, steps=20):
    return [[list(a) for a in per_robot] for _ in range(steps)]


def schedule(parts):
    out = []
    for n, per_robot in parts:
        out += constant(per_robot, n)
    return out


STILL = (0.0, 0.0)


def scenes():
    s = []
    # warehouse
    s.append(dict(env="warehouse", name="carry_to_left_zone", width=20.0, height=20.0, obstacles=SHELVES,
                  drop_zones=ZONES, robots=[[2.537, 10.113], [15.21, 4.33], [4.77, 15.61], [15.43, 15.87]],
                  packages=[[2.537, 10.113], [9.71, 2.13], [12.31, 17.77], [3.19, 3.41]], carrying=[0, -1, -1, -1],
                  actions=constant([(-1.0, 0.0), (0.3, -0.7), STILL, (-0.5, 0.5)])))
    s.append(dict(env="warehouse", name="pickup_then_shaping", width=20.0, height=20.0, obstacles=SHELVES,
                  drop_zones=ZONES, robots=[[3.113, 3.071], [15.21, 4.33], [4.77, 15.61], [15.43, 15.87]],
                  packages=[[4.057, 3.071], [16.37, 4.93], [12.31, 17.77], [8.19, 9.41]],
                  actions=constant([(1.0, 0.0), (0.9, 0.45), (0.2, -0.1), STILL])))
    s.append(dict(env="warehouse", name="collision_events", width=20.0, height=20.0, obstacles=SHELVES,
                  drop_zones=ZONES, robots=[[4.013, 4.271], [5.157, 4.271], [4.77, 15.61], [5.31, 15.61]],
                  packages=[[17.3, 2.2], [16.37, 16.93], [12.31, 17.77], [8.19, 9.41]],
                  actions=schedule([(4, [(1.0, 0.0), (-1.0, 0.0), (0.6, 0.0), (-0.6, 0.0)]),
                                    (6, [(-1.0, 0.0), (1.0, 0.0), (-0.8, 0.0), (0.8, 0.0)]),
                                    (10, [(1.0, 0.0), (-1.0, 0.0), (0.7, 0.0), (-0.7, 0.0)])])))
    s.append(dict(env="warehouse", name="shelf_block_and_wall_clip", width=20.0, height=20.0, obstacles=SHELVES,
                  drop_zones=ZONES, robots=[[4.513, 7.013], [19.87, 2.31], [0.137, 18.41], [14.73, 8.83]],
                  packages=[[9.71, 2.13], [12.31, 17.77], [3.19, 3.41], [17.5, 17.5]],
                  actions=constant([(1.0, 0.0), (1.0, 0.3), (-1.0, 1.0), (-0.4, -1.0)])))
    s.append(dict(env="warehouse", name="two_deliveries_success", width=20.0, height=20.0, obstacles=SHELVES,
                  drop_zones=ZONES, robots=[[3.862, 10.41], [17.63, 9.57], [4.77, 15.61], [15.43, 15.87]],
                  packages=[[3.862, 10.41], [17.63, 9.57], [12.31, 17.77], [3.19, 3.41]], carrying=[0, 1, -1, -1],
                  actions=constant([(-1.0, 0.0), (0.7, 0.1), (0.3, 0.3), (-0.2, -0.9)])))
    # search and rescue
    debris = [[12.7, 8.3, 0.73], [21.4, 14.9, 0.91], [9.1, 20.6, 0.55], [16.2, 24.4, 0.87],
              [4.6, 13.1, 0.62], [25.3, 5.7, 0.79], [14.8, 15.2, 0.66], [26.1, 21.9, 0.96]]
    far_victims = [[13.3, 2.9], [28.1, 12.2], [2.7, 27.4], [19.6, 28.3]]
    s.append(dict(env="search_rescue", name="coverage_only", width=30.0, height=30.0, obstacles=debris,
                  robots=[[7.61, 7.43], [22.37, 7.19], [7.13, 22.71], [22.59, 22.83]], victims=far_victims,
                  actions=constant([(0.8, 0.6), (-0.6, 0.8), (1.0, -0.2), (-0.3, -1.0)])))
    s.append(dict(env="search_rescue", name="find_then_rescue", width=30.0, height=30.0, obstacles=debris,
                  robots=[[7.61, 7.43], [22.37, 7.19], [7.13, 22.71], [22.59, 22.83]],
                  victims=[[8.93, 7.43], [28.1, 12.2], [2.7, 27.4], [19.6, 28.3]],
                  actions=constant([(1.0, 0.0), (0.1, 0.1), STILL, (0.2, -0.4)])))
    s.append(dict(env="search_rescue", name="two_rescues_success", width=30.0, height=30.0, obstacles=debris,
                  robots=[[7.61, 7.43], [22.37, 7.19], [7.13, 22.71], [22.59, 22.83]],
                  victims=[[8.53, 7.43], [22.37, 9.64], [2.7, 27.4], [19.6, 28.3]],
                  actions=constant([(1.0, 0.0), (0.0, 1.0), (-0.5, 0.5), STILL])))
    s.append(dict(env="search_rescue", name="late_rescue_decayed_health", width=30.0, height=30.0, obstacles=debris,
                  robots=[[7.61, 7.43], [22.37, 7.19], [7.13, 22.71], [22.59, 22.83]],
                  victims=[[7.61, 9.17], [28.1, 12.2], [2.7, 27.4], [19.6, 28.3]],
                  actions=schedule([(5, [STILL, (0.5, 0.5), STILL, STILL]),
                                    (15, [(0.0, 1.0), (0.5, 0.5), (0.4, 0.0), STILL])])))
    s.append(dict(env="search_rescue", name="debris_block_and_wall", width=30.0, height=30.0, obstacles=debris,
                  robots=[[11.63, 8.31], [29.91, 7.19], [7.13, 29.87], [22.59, 22.83]], victims=far_victims,
                  actions=constant([(1.0, 0.0), (1.0, -0.5), (0.2, 1.0), (0.9, -0.9)])))
    # mapping
    obst = [[10.1, 10.3, 0.83], [3.7, 15.9, 0.57], [16.4, 3.9, 0.71], [14.9, 15.1, 0.95]]
    s.append(dict(env="mapping", name="stationary_team", width=20.0, height=20.0, obstacles=obst,
                  robots=[[5.137, 5.071], [15.213, 4.879], [4.931, 15.117], [14.871, 13.037]],
                  actions=constant([STILL] * 4)))
    s.append(dict(env="mapping", name="spreading_out", width=20.0, height=20.0, obstacles=obst,
                  robots=[[5.137, 5.071], [15.213, 4.879], [4.931, 13.117], [12.871, 13.037]],
                  actions=constant([(-0.7, -0.7), (0.7, -0.7), (-0.7, 0.7), (0.7, 0.7)])))
    s.append(dict(env="mapping", name="converging", width=20.0, height=20.0, obstacles=obst,
                  robots=[[5.137, 5.071], [15.213, 4.879], [4.931, 13.117], [12.871, 12.037]],
                  actions=constant([(0.9, 0.9), (-0.9, 0.9), (0.9, -0.9), (-0.9, -0.9)])))
    s.append(dict(env="mapping", name="obstacle_block", width=20.0, height=20.0, obstacles=obst,
                  robots=[[8.531, 10.3], [16.4, 5.237], [2.01, 15.9], [15.43, 13.63]],
                  actions=constant([(1.0, 0.0), (0.0, -1.0), (1.0, 0.0), (0.0, 1.0)])))
    s.append(dict(env="mapping", name="coincident_team", width=20.0, height=20.0, obstacles=obst,
                  robots=[[5.137, 5.071]] * 4,
                  actions=constant([(0.5, 0.3)] * 4)))
    return s


ORACLES = {"warehouse": warehouse, "search_rescue": search_rescue, "mapping": mapping}


def main():
    out = []
    for sc in scenes():
        try:
            rewards = ORACLES[sc["env"]](sc)
        except TieError as e:
            raise SystemExit(f"{sc['name']}: {e}")
        sc = dict(sc)
        sc["expected_rewards"] = rewards
        sc["expected_return"] = math.fsum(rewards)
        out.append(sc)
    path = pathlib.Path(__file__).resolve().parents[1] / "data" / "reward_scenes.json"
    path.write_text(json.dumps({"scenes": out}, indent=1) + "\n")
    for sc in out:
        print(f"{sc['env']:14s} {sc['name']:28s} steps={len(sc['expected_rewards']):2d} return={sc['expected_return']:.12f}")


if __name__ == "__main__":
    main()
