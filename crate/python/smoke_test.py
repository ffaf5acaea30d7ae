"""Smoke test for the csipca Python bindings.

Build and install the extension first, e.g.

    pip install --no-build-isolation ./crates/py

then run ``python python/smoke_test.py``.
"""

import math
import os
import tempfile

import csipca


def frob(m):
    return math.sqrt(sum(abs(z) ** 2 for row in m for z in row))


def close(a, b, tol):
    return all(abs(x - y) <= tol for ra, rb in zip(a, b) for x, y in zip(ra, rb))


def main():
    v = csipca.steering_vector(30.0, 95.0)
    assert len(v) == 32
    assert abs(sum(abs(z) ** 2 for z in v) - 1.0) < 1e-12

    ds = csipca.Dataset.generate("high-spread-300ns", seed=7, count=3)
    assert len(ds) == 3 and ds.dims == (624, 32)
    h = ds.sample(0)

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "d.cfr")
        ds.save(path)
        assert os.path.getsize(path) == 32 + 3 * (8 + 624 * 32 * 16)
        assert csipca.Dataset.load(path).to_bytes() == ds.to_bytes()

    # Angular-delay round trip is unitary.
    ad = csipca.to_angular_delay(h)
    assert abs(frob(ad) - frob(h)) < 1e-9 * frob(h)
    assert close(csipca.from_angular_delay(ad), h, 1e-12)

    # AD pipeline: 25 taps, 3 components.
    taps, idx = csipca.select_taps(ad, 25)
    basis = csipca.pca_fit(taps, "ad")
    cum = basis.cumulative_variance()
    report = csipca.compress(taps, basis, 3, tap_indices=idx, n_full=624)
    rec = report.reconstruct()
    g = csipca.gcs(rec, taps)
    assert abs(g - math.sqrt(cum[2])) < 1e-9, (g, cum[2])
    q8 = report.quantized(8)
    assert q8.q_bits == 8
    back = csipca.CsiReport.from_bytes(q8.to_bytes())
    assert back.to_bytes() == q8.to_bytes()
    full = back.reconstruct_angular_delay()
    g_h = csipca.gcs(csipca.from_angular_delay(full), h)
    print(f"AD k=3 Q=8: GCS on taps {csipca.gcs(back.reconstruct(), taps):.4f}, on H_f {g_h:.4f}")

    # EV pipeline: 13 sub-bands, k = 13 is lossless.
    ev = csipca.ev_matrix(h, 13)
    ev_basis = csipca.pca_fit(ev, "ev")
    lossless = csipca.compress(ev, ev_basis, 13).reconstruct()
    assert abs(csipca.gcs(lossless, ev) - 1.0) < 1e-9

    # Table values.
    assert csipca.percent_display(csipca.overhead_reduction_ad(25, 32, 1)) == 93
    ev3 = csipca.overhead_reduction_ev(13, 32, 3)
    assert (csipca.percent_display(ev3, "floor"), csipca.percent_display(ev3)) == (67, 68)
    bits = csipca.feedback_bits("ad", 25, 32, 2, 8)
    assert bits["ceil"] == 1824, bits

    qm = csipca.quantize([[0.5 + 0.25j, -1.0 + 0j]], 4)
    assert qm.q_bits == 4 and qm.scale == 1.0
    # The peak lands exactly on the outermost level; zero has no level of its own.
    assert qm.dequantize()[0][1].real == -1.0
    assert abs(abs(qm.dequantize()[0][1].imag) - 1 / 15) < 1e-15

    try:
        csipca.pca_fit(taps, "xyz")
    except ValueError:
        pass
    else:
        raise AssertionError("bad mode accepted")

    print("python smoke test passed")


if __name__ == "__main__":
    main()
