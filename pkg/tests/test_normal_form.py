"""Sinc normal form: loci, designated index, kappa/weight construction."""

import numpy as np
import pytest

from specgap.gridfield import Chart
from specgap import normal_form as nf


def chart2(n1=129, n2=9, half=2.0):
    return Chart(((-half, half), (-half, half)), (n1, n2))


class TestSinc:
    def test_zero(self):
        assert nf.sinc(0.0) == 1.0

    def test_pi(self):
        assert abs(nf.sinc(np.pi)) < 1e-15

    def test_taylor_branch(self):
        x = 1e-6
        assert abs(nf.sinc(x) - (1.0 - x * x / 6.0)) < 1e-16

    def test_array_input(self):
        out = nf.sinc(np.array([0.0, np.pi / 2, np.pi]))
        assert np.allclose(out, [1.0, 2 / np.pi, 0.0], atol=1e-15)


class TestStandardAmplitude:
    def test_denominator_vanishes(self):
        c = nf.MetricCoefficient(gplus=lambda x, y: np.pi / 2 + 0 * x,
                                 gminus=lambda x, y: 0.0 * x)
        val = nf.standard_amplitude(c, 0.0, 0.0)
        assert abs(val - 2.0 / np.pi) < 1e-14

    def test_simultaneous_zeros_rejected(self):
        c = nf.MetricCoefficient(gplus=lambda x, y: 0.0 * x,
                                 gminus=lambda x, y: 0.0 * x)
        with pytest.raises(ValueError):
            nf.standard_amplitude(c, 0.0, 0.0)

    def test_unit_values(self):
        c = nf.MetricCoefficient(gplus=lambda x, y: 1.0 + 0 * x,
                                 gminus=lambda x, y: 1.0 + 0 * x)
        val = nf.standard_amplitude(c, 0.3, 0.1)
        assert abs(val - np.sin(1.0) ** 2) < 1e-14

    def test_out_of_tube_signal(self):
        c = nf.MetricCoefficient(gplus=lambda x, y: 1.0 + 0 * x,
                                 gminus=lambda x, y: x)
        loci = nf.LocusSet(
            nondiff=[nf.Locus(sigma=np.zeros(9), kind="N")],
            rank_def=[], eps=0.25)
        with pytest.raises(nf.OutOfDomainError):
            nf.standard_amplitude(c, 1.5, 0.0, loci=loci, blow_value=1.5)


class TestClassifyLoci:
    def test_constant_coefficient_empty(self):
        ch = chart2()
        c = nf.MetricCoefficient(gplus=lambda x, y: 1.0 + 0 * x,
                                 gminus=lambda x, y: 2.0 + 0 * x)
        loci = nf.classify_loci(c, ch, n_samples=201)
        assert not loci.nondiff and not loci.rank_def

    def test_synthetic_parabola(self):
        ch = chart2()
        c = nf.MetricCoefficient(gplus=lambda x, y: 1.0 + 0 * x,
                                 gminus=lambda x, y: x * x - 1.0)
        loci = nf.classify_loci(c, ch, n_samples=801)
        assert len(loci.nondiff) == 2
        roots = sorted(float(l.sigma.ravel()[0]) for l in loci.nondiff)
        assert abs(roots[0] + 1.0) < 1e-9 and abs(roots[1] - 1.0) < 1e-9

    def test_bisection_refinement(self):
        ch = chart2()
        c = nf.MetricCoefficient(gplus=lambda x, y: x - 0.123456789,
                                 gminus=lambda x, y: 1.0 + 0 * x)
        loci = nf.classify_loci(c, ch, n_samples=401)
        assert len(loci.rank_def) == 1
        assert abs(float(loci.rank_def[0].sigma.ravel()[0])
                   - 0.123456789) < 1e-9

    def test_varying_root_count_warns(self):
        ch = chart2(n1=129, n2=9)
        # root of g- exists only where y > 0: count varies transversally
        c = nf.MetricCoefficient(gplus=lambda x, y: 1.0 + 0 * x,
                                 gminus=lambda x, y: x - 10.0 * (y < 0) + 0.0)
        with pytest.warns(UserWarning):
            nf.classify_loci(c, ch, n_samples=201)

    def test_default_eps_quarter_rule(self):
        ch = chart2()
        c = nf.MetricCoefficient(gplus=lambda x, y: 1.0 + 0 * x,
                                 gminus=lambda x, y: x)
        loci = nf.classify_loci(c, ch, n_samples=401)
        # single locus at 0, boundary distance 2 -> eps = 0.5
        assert abs(loci.eps - 0.5) < 1e-9


class TestDesignatedIndex:
    def test_single_locus_base_convention(self):
        ch = chart2()
        c = nf.MetricCoefficient(gplus=lambda x, y: 1.0 + 0 * x,
                                 gminus=lambda x, y: 0.4 * x)
        assert nf.designated_index(c, ch) == 0

    def test_multi_locus_count(self):
        ch = chart2()
        # g- roots at +/-1 (sign changes), g+ root at 0 (sign change):
        # three simple roots -> s = 3, index 6
        c = nf.MetricCoefficient(gplus=lambda x, y: 0.4 * x,
                                 gminus=lambda x, y: 0.3 * (x * x - 1.0))
        assert nf.designated_index(c, ch) == 6

    def test_tangential_counts_twice(self):
        ch = chart2()
        # g+ touches zero quadratically at 0: even vanishing, counts 2
        c = nf.MetricCoefficient(gplus=lambda x, y: 0.4 * x * x,
                                 gminus=lambda x, y: 0.3 * (x * x - 1.0))
        assert nf.designated_index(c, ch) == 8

    def test_grid_refinement_stability(self):
        ch = chart2()
        c = nf.MetricCoefficient(gplus=lambda x, y: 0.4 * x,
                                 gminus=lambda x, y: 0.3 * (x * x - 1.0))
        i1 = nf.designated_index(c, ch, n_samples=2001)
        i2 = nf.designated_index(c, ch, n_samples=4001)
        assert i1 == i2


class TestConstructKappa:
    def coeff_one_locus(self):
        return nf.MetricCoefficient(gplus=lambda x, y: 1.0 + 0 * x,
                                    gminus=lambda x, y: 0.5 * x)

    def test_no_loci_constant_quarter_pi(self):
        ch = chart2()
        c = nf.MetricCoefficient(gplus=lambda x, y: 1.0 + 0 * x,
                                 gminus=lambda x, y: 2.0 + 0.1 * x)
        loci = nf.classify_loci(c, ch, n_samples=201)
        form = nf.construct_kappa(c, loci, ch)
        assert np.allclose(form.kappa, np.pi / 4)
        # w carries the full amplitude: e^{2w} cos^2 = amplitude
        x, y = ch.grids()
        amp = np.abs(nf.sinc(c.gminus(x, y)) * nf.sinc(c.gplus(x, y)))
        assert np.max(np.abs(np.exp(2 * form.w) * 0.5 - amp)) < 1e-10

    def test_one_locus_structure(self):
        ch = chart2()
        c = self.coeff_one_locus()
        loci = nf.classify_loci(c, ch, n_samples=801)
        form = nf.construct_kappa(c, loci, ch)
        xs = ch.axis(0)
        i0 = int(np.argmin(np.abs(xs)))
        # exact root at the locus grid point, cos = +1 (N locus)
        assert abs(np.sin(form.kappa[i0, 4])) < 1e-12
        assert abs(np.cos(form.kappa[i0, 4]) - 1.0) < 1e-12
        # sign change of sin(kappa) across the locus
        assert np.sin(form.kappa[i0 - 3, 4]) * np.sin(
            form.kappa[i0 + 3, 4]) < 0
        # boundary: cos = sqrt(2)/2 and zero x1-derivative
        assert abs(np.cos(form.kappa[0, 4]) - np.sqrt(2) / 2) < 1e-12
        assert abs(np.cos(form.kappa[-1, 4]) - np.sqrt(2) / 2) < 1e-12
        h = ch.spacing(0)
        assert abs(form.kappa[1, 4] - form.kappa[0, 4]) < 1e-10
        assert abs(form.kappa[-1, 4] - form.kappa[-2, 4]) < 1e-10

    def test_alternating_signs_n_then_o(self):
        ch = chart2()
        c = nf.MetricCoefficient(gplus=lambda x, y: 0.5 * (x - 0.5),
                                 gminus=lambda x, y: 0.5 * (x + 0.5))
        loci = nf.classify_loci(c, ch, n_samples=801)
        form = nf.construct_kappa(c, loci, ch)
        xs = ch.axis(0)
        iN = int(np.argmin(np.abs(xs + 0.5)))
        iO = int(np.argmin(np.abs(xs - 0.5)))
        assert abs(np.cos(form.kappa[iN, 4]) - 1.0) < 1e-12
        assert abs(np.cos(form.kappa[iO, 4]) + 1.0) < 1e-12

    def test_reconstruction_on_tube(self):
        ch = chart2()
        c = self.coeff_one_locus()
        loci = nf.classify_loci(c, ch, n_samples=801)
        form = nf.construct_kappa(c, loci, ch)
        x, y = ch.grids()
        amp = np.abs(nf.sinc(c.gminus(x, y)) * nf.sinc(c.gplus(x, y)))
        cos2 = np.cos(form.kappa) ** 2
        tube = np.abs(x) <= loci.eps
        good = tube & (cos2 > 1e-6) & (amp > 1e-12)
        rec = np.exp(2 * form.w) * cos2
        assert np.max(np.abs((rec - amp)[good] / amp[good])) < 1e-10

    def test_amplitude_continuous_across_locus(self):
        ch = chart2()
        c = self.coeff_one_locus()
        xs = ch.axis(0)
        i0 = int(np.argmin(np.abs(xs)))
        left = nf.standard_amplitude(c, xs[i0 - 1], 0.0)
        right = nf.standard_amplitude(c, xs[i0 + 1], 0.0)
        assert abs(left - right) < 2 * abs(xs[1] - xs[0])

    def test_coalesced_locus_touching_profile(self):
        # coincident N and O roots dip to cos = +1 without a sign change of
        # sin(kappa); the off-tube plateau sits at sin = +sqrt(2)/2
        ch = chart2()
        xs = ch.axis(0)
        kap = nf._kappa_ray(xs, [(0.0, "NO", True)], 0.5)
        i0 = int(np.argmin(np.abs(xs)))
        assert abs(kap[i0]) < 1e-12                      # cos = +1 exactly
        assert abs(np.sin(kap[0]) - np.sqrt(2) / 2) < 1e-12
        assert abs(np.sin(kap[-1]) - np.sqrt(2) / 2) < 1e-12
        assert np.all(np.sin(kap[np.abs(xs) > 1e-9]) > 0)

    def test_locus_spacing_resolution_error(self):
        ch = Chart(((-2.0, 2.0), (-2.0, 2.0)), (17, 5))
        c = nf.MetricCoefficient(gplus=lambda x, y: x - 0.1,
                                 gminus=lambda x, y: x + 0.1)
        loci = nf.classify_loci(c, ch, n_samples=801)
        with pytest.raises(nf.LocusResolutionError):
            nf.construct_kappa(c, loci, ch)

    def test_manifest(self):
        ch = chart2()
        c = self.coeff_one_locus()
        loci = nf.classify_loci(c, ch, n_samples=401)
        form = nf.construct_kappa(c, loci, ch)
        text = form.manifest()
        assert "s_index 0" in text and "eps" in text and "locus N" in text


class TestLaplaceBeltrami:
    def flat_metric(self, ch):
        def metric(*grids):
            d = len(grids)
            g = np.zeros((d, d) + grids[0].shape)
            for i in range(d):
                g[i, i] = 1.0
            return g
        return metric

    def test_flat_constant_field_zero(self):
        ch = chart2(65, 9)
        kappa = np.full(ch.shape, np.pi / 4)
        w = np.zeros(ch.shape)
        form = nf.NormalForm(w=w, kappa=kappa, s_index=0,
                             loci=nf.LocusSet([], [], 0.5))
        res = nf.laplace_beltrami_residual(self.flat_metric(ch), form, ch)
        assert res < 1e-10

    def test_flat_sine_field_matches_oracle(self):
        ch = Chart(((0.0, 1.0), (0.0, 1.0)), (257, 5))
        x, y = ch.grids()
        kappa = np.pi * x
        w = np.zeros(ch.shape)
        form = nf.NormalForm(w=w, kappa=kappa, s_index=0,
                             loci=nf.LocusSet([], [], 0.1))
        res = nf.laplace_beltrami_residual(self.flat_metric(ch), form, ch)
        # symbolic oracle: max |d^2/dx^2 sin^10(pi x)|
        xs = np.linspace(0, 1, 4001)
        oracle = np.max(np.abs(
            np.pi ** 2 * (90 * np.sin(np.pi * xs) ** 8
                          * np.cos(np.pi * xs) ** 2
                          - 10 * np.sin(np.pi * xs) ** 10)))
        assert abs(res - oracle) < 2e-3 * oracle

    def test_exclusion_band_applied(self):
        ch = chart2(129, 5)
        c = nf.MetricCoefficient(gplus=lambda x, y: 1.0 + 0 * x,
                                 gminus=lambda x, y: 0.5 * x)
        loci = nf.classify_loci(c, ch, n_samples=401)
        form = nf.construct_kappa(c, loci, ch)
        res = nf.laplace_beltrami_residual(self.flat_metric(ch), form, ch)
        assert np.isfinite(res)
