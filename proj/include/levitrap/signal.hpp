#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "levitrap/dynamics.hpp"
#include "levitrap/fft.hpp"
#include "levitrap/optim.hpp"
#include "levitrap/rng.hpp"

// Detection transduction (motion -> detector volts), Welch spectral
// estimation, resonance fitting and the equipartition volts-to-meters
// calibration.
namespace levitrap {

struct VoltageTrace {
    double sample_rate = 0.0;    // Hz
    std::vector<double> samples; // V
    std::string axis = "z";

    double variance() const {
        if (samples.empty()) return 0.0;
        double mean = 0.0;
        for (double s : samples) mean += s;
        mean /= double(samples.size());
        double var = 0.0;
        for (double s : samples) var += (s - mean) * (s - mean);
        return var / double(samples.size());
    }
};

/// One-sided power spectral density estimate.
struct Psd {
    std::vector<double> frequencies;  // Hz, ascending
    std::vector<double> values;       // V^2/Hz
    double resolution_bandwidth = 0;  // Hz (window ENBW)
    int n_averages = 0;               // Welch segment count
    double windowed_variance = 0;     // V^2, mean of per-segment windowed power

    double df() const { return frequencies.size() > 1 ? frequencies[1] - frequencies[0] : 0.0; }

    /// Parseval check: integral of the PSD vs the windowed input variance.
    double parseval_residual() const {
        double integral = 0.0;
        for (double v : values) integral += v;
        integral *= df();
        if (windowed_variance == 0.0) return 0.0;
        return std::abs(integral - windowed_variance) / windowed_variance;
    }

    std::size_t index_of(double f) const {
        const auto it = std::lower_bound(frequencies.begin(), frequencies.end(), f);
        if (it == frequencies.end()) return frequencies.size() - 1;
        return std::size_t(it - frequencies.begin());
    }

    /// integral of the PSD over [f_lo, f_hi]
    double band_power(double f_lo, double f_hi) const {
        double s = 0.0;
        for (std::size_t i = 0; i < frequencies.size(); ++i)
            if (frequencies[i] >= f_lo && frequencies[i] <= f_hi) s += values[i];
        return s * df();
    }

    /// frequency of the largest bin in [f_lo, f_hi]
    double peak_frequency(double f_lo, double f_hi) const {
        double best = -1.0, fbest = f_lo;
        for (std::size_t i = 0; i < frequencies.size(); ++i)
            if (frequencies[i] >= f_lo && frequencies[i] <= f_hi && values[i] > best) {
                best = values[i];
                fbest = frequencies[i];
            }
        return fbest;
    }

    /// median PSD level in [f_lo, f_hi] (robust local floor estimate)
    double median_level(double f_lo, double f_hi) const {
        std::vector<double> v;
        for (std::size_t i = 0; i < frequencies.size(); ++i)
            if (frequencies[i] >= f_lo && frequencies[i] <= f_hi) v.push_back(values[i]);
        if (v.empty()) return 0.0;
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    }
};

struct LorentzianFit {
    double center_frequency = 0; // Hz
    double linewidth = 0;        // Hz, FWHM (gamma/2pi for a thermal mode)
    double area = 0;             // V^2, fitted integral of S - offset
    double offset = 0;           // V^2/Hz
    double numeric_area = 0;     // V^2, window integral minus fitted offset
    double center_frequency_err = 0, linewidth_err = 0, area_err = 0, offset_err = 0;
    std::string model = "lorentzian"; // or "thermal_oscillator"
};

enum class Window { hann, boxcar };
enum class LineModel { lorentzian, thermal_oscillator };

/// Detector chain: V_i = sum_j crosstalk_ij [conv_j u_j + b2 (conv_j u_j)^2] + n_i
/// with white noise of the configured one-sided PSD. Axes with zero
/// conversion are simply not detected.
inline std::array<VoltageTrace, 3> transduce(const SimTrajectory& traj, const DetectionConfig& det,
                                             std::uint64_t rng_seed) {
    det.validate();
    const std::size_t n = traj.size();
    const double noise_scale =
        det.noise_floor > 0.0 ? std::sqrt(det.noise_floor * traj.sample_rate / 2.0) : 0.0;
    Rng rng(rng_seed);

    std::array<std::vector<double>, 3> linear;
    for (int j = 0; j < 3; ++j) {
        linear[j].resize(n);
        const double c = det.conversion[j];
        const double b2 = det.quadratic_coefficient;
        const auto& u = traj.positions[j];
        for (std::size_t k = 0; k < n; ++k) {
            const double s = c * u[k];
            linear[j][k] = b2 == 0.0 ? s : s + b2 * s * s;
        }
    }

    std::array<VoltageTrace, 3> out;
    for (int i = 0; i < 3; ++i) {
        out[i].sample_rate = traj.sample_rate;
        out[i].axis = axis_name(Axis(i));
        out[i].samples.resize(n);
        for (std::size_t k = 0; k < n; ++k) {
            double v = det.crosstalk[i][0] * linear[0][k] + det.crosstalk[i][1] * linear[1][k] +
                       det.crosstalk[i][2] * linear[2][k];
            out[i].samples[k] = v;
        }
    }
    // independent noise per channel, drawn channel-major for reproducibility
    if (noise_scale > 0.0)
        for (int i = 0; i < 3; ++i)
            for (std::size_t k = 0; k < n; ++k) out[i].samples[k] += noise_scale * rng.gaussian();
    return out;
}

/// Welch periodogram average: Hann (default) or boxcar window, mean removed
/// per segment, one-sided normalization. resolution_bandwidth is the window
/// ENBW; integral of the PSD equals the windowed variance (Parseval).
inline Psd welch_psd(const VoltageTrace& trace, std::size_t segment_length,
                     double overlap = 0.5, Window window = Window::hann) {
    const std::size_t n = trace.samples.size();
    if (segment_length < 8) throw validation_error("welch_psd: segment_length must be >= 8");
    if (segment_length > n)
        throw validation_error("welch_psd: segment_length " + std::to_string(segment_length) +
                               " exceeds trace length " + std::to_string(n));
    if (!(overlap >= 0.0 && overlap < 1.0))
        throw validation_error("welch_psd: overlap must lie in [0, 1)");

    const std::size_t hop = std::max<std::size_t>(1, std::size_t(segment_length * (1.0 - overlap)));
    std::vector<double> w(segment_length, 1.0);
    if (window == Window::hann)
        for (std::size_t i = 0; i < segment_length; ++i)
            w[i] = 0.5 * (1.0 - std::cos(2.0 * constants::pi * double(i) / double(segment_length)));
    double wsum = 0.0, w2sum = 0.0;
    for (double x : w) {
        wsum += x;
        w2sum += x * x;
    }

    const std::size_t n_bins = segment_length / 2 + 1;
    std::vector<double> acc(n_bins, 0.0);
    std::vector<std::complex<double>> seg(segment_length);
    int n_segments = 0;
    double windowed_var = 0.0;
    for (std::size_t start = 0; start + segment_length <= n; start += hop) {
        double mean = 0.0;
        for (std::size_t i = 0; i < segment_length; ++i) mean += trace.samples[start + i];
        mean /= double(segment_length);
        double segpow = 0.0;
        for (std::size_t i = 0; i < segment_length; ++i) {
            const double x = (trace.samples[start + i] - mean) * w[i];
            seg[i] = x;
            segpow += x * x;
        }
        detail::fft(seg);
        for (std::size_t k = 0; k < n_bins; ++k) acc[k] += std::norm(seg[k]);
        windowed_var += segpow / w2sum;
        ++n_segments;
    }
    if (n_segments == 0) throw validation_error("welch_psd: no segments fit the trace");

    Psd psd;
    psd.n_averages = n_segments;
    psd.windowed_variance = windowed_var / n_segments;
    psd.resolution_bandwidth = trace.sample_rate * w2sum / (wsum * wsum); // ENBW
    psd.frequencies.resize(n_bins);
    psd.values.resize(n_bins);
    const double scale = 1.0 / (trace.sample_rate * w2sum * double(n_segments));
    for (std::size_t k = 0; k < n_bins; ++k) {
        psd.frequencies[k] = double(k) * trace.sample_rate / double(segment_length);
        const bool interior = k != 0 && !(segment_length % 2 == 0 && k == n_bins - 1);
        psd.values[k] = acc[k] * scale * (interior ? 2.0 : 1.0);
    }
    return psd;
}

namespace detail {

inline double lorentzian_model(const std::vector<double>& p, double f) {
    // p = {f0, fwhm, area, offset}
    const double hw = 0.5 * std::abs(p[1]);
    const double d = f - p[0];
    return p[3] + (p[2] / constants::pi) * hw / (d * d + hw * hw);
}

inline double thermal_oscillator_model(const std::vector<double>& p, double f) {
    // p = {f0, fwhm, area, offset}; area-normalized damped-oscillator profile
    const double f0 = p[0], g = std::abs(p[1]);
    const double d = (f0 * f0 - f * f);
    const double denom = d * d + g * g * f * f;
    return p[3] + p[2] * (2.0 * g * f0 * f0 / constants::pi) / std::max(denom, 1e-300);
}

} // namespace detail

/// Weighted least-squares fit of a single resonance inside [f_lo, f_hi].
/// Errors: numerical_error on non-convergence; validation_error naming the
/// second peak when the window holds more than one resonance.
inline LorentzianFit fit_lorentzian(const Psd& psd, double f_lo, double f_hi,
                                    LineModel model = LineModel::lorentzian) {
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < psd.frequencies.size(); ++i)
        if (psd.frequencies[i] >= f_lo && psd.frequencies[i] <= f_hi) {
            xs.push_back(psd.frequencies[i]);
            ys.push_back(psd.values[i]);
        }
    if (xs.size() < 8)
        throw validation_error("fit_lorentzian: window holds fewer than 8 bins");

    // initial guesses from the raw window
    std::size_t ipk = 0;
    for (std::size_t i = 1; i < ys.size(); ++i)
        if (ys[i] > ys[ipk]) ipk = i;
    const double edge = 0.5 * (ys.front() + ys.back());
    const double height = std::max(ys[ipk] - edge, 1e-30);
    double half_lo = xs.front(), half_hi = xs.back();
    for (std::size_t i = ipk; i-- > 0;)
        if (ys[i] - edge < height / 2) {
            half_lo = xs[i];
            break;
        }
    for (std::size_t i = ipk + 1; i < ys.size(); ++i)
        if (ys[i] - edge < height / 2) {
            half_hi = xs[i];
            break;
        }
    const double fwhm0 = std::max(half_hi - half_lo, 2.0 * (xs[1] - xs[0]));
    std::vector<double> p0 = {xs[ipk], fwhm0, height * constants::pi * fwhm0 / 2.0, edge};

    // relative-error weights, flooring at a fraction of the peak
    std::vector<double> weights(xs.size());
    const double floor_level = std::max(1e-3 * ys[ipk], 1e-300);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double s = std::max(ys[i], floor_level);
        weights[i] = 1.0 / (s * s);
    }

    const auto model_fn =
        model == LineModel::lorentzian ? detail::lorentzian_model : detail::thermal_oscillator_model;
    auto res = detail::lm_fit(model_fn, xs, ys, weights, p0);
    // Periodogram bins carry multiplicative chi^2 noise, so weighting by the
    // data over-trusts downward fluctuations and biases the fit low; two
    // model-reweighted passes remove that.
    for (int pass = 0; pass < 2; ++pass) {
        if (!std::isfinite(res.params[0])) break;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            const double m = std::max(model_fn(res.params, xs[i]), floor_level);
            weights[i] = 1.0 / (m * m);
        }
        res = detail::lm_fit(model_fn, xs, ys, weights, res.params);
    }
    if (!res.converged || !(std::abs(res.params[1]) > 0.0) || !std::isfinite(res.params[0]) ||
        !std::isfinite(res.params[1]))
        throw numerical_error("fit_lorentzian: fit did not converge");

    LorentzianFit fit;
    fit.center_frequency = res.params[0];
    fit.linewidth = std::abs(res.params[1]);
    fit.area = res.params[2];
    fit.offset = res.params[3];
    fit.center_frequency_err = res.param_errors[0];
    fit.linewidth_err = res.param_errors[1];
    fit.area_err = res.param_errors[2];
    fit.offset_err = res.param_errors[3];
    fit.model = model == LineModel::lorentzian ? "lorentzian" : "thermal_oscillator";
    if (!(fit.area > 0.0)) throw numerical_error("fit_lorentzian: non-positive fitted area");

    const double df = xs[1] - xs[0];
    double numeric = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) numeric += (ys[i] - fit.offset) * df;
    fit.numeric_area = numeric;

    // residual test for a second resonance in the window; the threshold
    // respects the chi^2 scatter of an n_averages-deep periodogram so wing
    // bins of the fitted line cannot trigger it
    const double peak_height = model_fn(res.params, fit.center_frequency) - fit.offset;
    const double sigma_rel = 1.0 / std::sqrt(double(std::max(psd.n_averages, 1)));
    double worst = 0.0, worst_f = 0.0;
    int run = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (std::abs(xs[i] - fit.center_frequency) < 2.0 * fit.linewidth) {
            run = 0;
            continue;
        }
        const double model_level = model_fn(res.params, xs[i]);
        const double resid = ys[i] - model_level;
        if (resid > 0.25 * peak_height && resid > 5.0 * sigma_rel * model_level) {
            if (++run >= 2 && resid > worst) {
                worst = resid;
                worst_f = xs[i];
            }
        } else {
            run = 0;
        }
    }
    if (worst > 0.0)
        throw validation_error("fit_lorentzian: window contains a second peak near " +
                               std::to_string(worst_f) + " Hz");
    return fit;
}

/// Equipartition calibration, S^2 = k_B T / (m omega^2 <V^2>); S converts
/// detector volts back to meters.
inline double calibrate_conversion(double measured_variance, double temperature, double mass,
                                   double omega) {
    if (!(measured_variance > 0.0) || !(temperature > 0.0) || !(mass > 0.0) || !(omega > 0.0))
        throw validation_error("calibrate_conversion: all inputs must be > 0");
    return std::sqrt(constants::k_boltzmann * temperature /
                     (mass * omega * omega * measured_variance));
}

/// Noise-subtracted mode power: band integral minus the local floor estimated
/// from flanking bands. Used for area-based thermometry.
inline double mode_area(const Psd& psd, double f_center, double half_width,
                        double flank_gap_factor = 1.5, double flank_width_factor = 2.0) {
    const double f_lo = f_center - half_width, f_hi = f_center + half_width;
    const double gap = flank_gap_factor * half_width;
    const double fw = flank_width_factor * half_width;
    const double floor_lo = psd.median_level(f_lo - gap - fw, f_lo - gap);
    const double floor_hi = psd.median_level(f_hi + gap, f_hi + gap + fw);
    const double floor_level = 0.5 * (floor_lo + floor_hi);
    const double raw = psd.band_power(f_lo, f_hi);
    return raw - floor_level * (f_hi - f_lo);
}

} // namespace levitrap
