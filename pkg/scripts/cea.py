"""Cea ratios of the stationary problem over four nested levels."""
from fracfd.kernel import make_kernel
from fracfd.study import elliptic_study

if __name__ == "__main__":
    print("s,m,n,ratio")
    for s in (0.3, 0.5, 0.7):
        for m in (0.5, 1.0):
            for n, r in zip((16, 32, 64, 128), elliptic_study(make_kernel(s=s), m, (16, 32, 64, 128))):
                print(f"{s},{m},{n},{'exact' if r.exact else f'{r.ratio:.6f}'}")
