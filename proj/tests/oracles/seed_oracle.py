"""Reference SplitMix64 / xoshiro256** / Box-Muller values for the seed tests."""
import math

M64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
SALT = {"env": 0x656E765F73747265, "noise": 0x6E6F6973655F7374, "policy": 0x706F6C6963795F73}


def mix(x):
    x &= M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & M64
    return x ^ (x >> 31)


def rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & M64


class Xoshiro:
    def __init__(self, seed):
        s = seed
        self.s = []
        for _ in range(4):
            s = (s + GOLDEN) & M64
            self.s.append(mix(s))

    def next(self):
        s = self.s
        result = (rotl((s[1] * 5) & M64, 7) * 9) & M64
        t = (s[1] << 17) & M64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result

    def uniform(self):
        return (self.next() >> 11) * 2.0**-53

    def gaussian_pair(self):
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        return r * math.cos(2 * math.pi * u2), r * math.sin(2 * math.pi * u2)


def episode_seed(run, idx):
    return mix(((run << 32) & M64) ^ idx)


def stream(seed, purpose):
    return Xoshiro(mix(seed ^ SALT[purpose]))


def run_stream(run, purpose):
    return stream(mix(((~run) & M64) * GOLDEN), purpose)


if __name__ == "__main__":
    print("mix(0)", hex(mix(0)), "mix(1)", hex(mix(1)), "mix(0x123456789abcdef)", hex(mix(0x123456789ABCDEF)))
    for run, idx in [(0, 0), (0, 1), (1, 0), (4, 417), (31, 4095)]:
        print(f"episode_seed({run},{idx})", hex(episode_seed(run, idx)))
    r = Xoshiro(42)
    print("xoshiro(42) first 4", [hex(r.next()) for _ in range(4)])
    r = stream(episode_seed(0, 0), "env")
    print("stream(ep(0,0),env) u64", hex(r.next()), "uniform", repr(r.uniform()))
    r = stream(episode_seed(0, 0), "noise")
    print("stream(ep(0,0),noise) gaussian pair", [repr(v) for v in r.gaussian_pair()])
    r = run_stream(3, "policy")
    print("run_stream(3,policy) u64", hex(r.next()))
