"""Low-pass Butterworth coefficients by the bilinear transform at 50 digits."""
import mpmath as mp

mp.mp.dps = 50


def butter(order, fc, fs):
    warped = 2 * fs * mp.tan(mp.pi * fc / fs)
    poles = [warped * mp.exp(1j * mp.pi * (2 * k + order + 1) / (2 * order)) for k in range(order)]
    zpoles = [(2 * fs + p) / (2 * fs - p) for p in poles]
    a = [mp.mpc(1)]
    for z in zpoles:
        a = [x - z * y for x, y in zip(a + [0], [0] + a)]
    b = [mp.binomial(order, k) for k in range(order + 1)]
    gain = sum(x.real for x in a) / sum(b)
    return [x * gain for x in b], [x.real for x in a]


def gain_at(b, a, f, fs):
    z = mp.exp(-2j * mp.pi * f / fs)
    num = sum(c * z**k for k, c in enumerate(b))
    den = sum(c * z**k for k, c in enumerate(a))
    return abs(num / den)


if __name__ == "__main__":
    b, a = butter(4, mp.mpf("0.5"), mp.mpf(120))
    print("b =", [mp.nstr(x, 25) for x in b])
    print("a =", [mp.nstr(x, 25) for x in a])
    h = gain_at(b, a, 5, 120)
    print("|H(5 Hz)| =", mp.nstr(h, 20), " |H|^2 =", mp.nstr(h**2, 20))
