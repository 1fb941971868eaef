#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "psgan/image.hpp"
#include "psgan/sampler.hpp"

namespace psgan {

// ---------------------------------------------------------------------------
// Circular autocorrelation, per channel normalized then averaged.
// ---------------------------------------------------------------------------
struct AutocorrMap {
  int max_lag = 0;
  Tensor<double> values;  // (2*max_lag+1, 2*max_lag+1), index (ly+max_lag, lx+max_lag)

  double at(int ly, int lx) const { return values.at(ly + max_lag, lx + max_lag); }
};

inline AutocorrMap autocorrelation(const ImageF& img, int max_lag) {
  if (max_lag < 1) throw std::invalid_argument("autocorrelation: max_lag must be >= 1");
  // circular estimator: wrap artifacts are kept away from the lag window
  if (4 * max_lag > std::min(img.h, img.w))
    throw std::invalid_argument("autocorrelation: max_lag must be <= min(h, w) / 4");
  const int H = img.h, W = img.w;
  const int side = 2 * max_lag + 1;
  AutocorrMap map;
  map.max_lag = max_lag;
  map.values = Tensor<double>({side, side});

  std::vector<double> x(static_cast<std::size_t>(H) * W);
  std::vector<double> r(static_cast<std::size_t>(H) * W);
  const int wf = W / 2 + 1;
  std::vector<fftw_complex> f(static_cast<std::size_t>(H) * wf);
  fftw_plan fwd = fftw_plan_dft_r2c_2d(H, W, x.data(), f.data(), FFTW_ESTIMATE);
  fftw_plan bwd = fftw_plan_dft_c2r_2d(H, W, f.data(), r.data(), FFTW_ESTIMATE);

  int used_channels = 0;
  for (int c = 0; c < 3; ++c) {
    double mean = 0;
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) mean += img.at(y, xx, c);
    mean /= static_cast<double>(H) * W;
    double var = 0;
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        const double v = img.at(y, xx, c) - mean;
        x[static_cast<std::size_t>(y) * W + xx] = v;
        var += v * v;
      }
    if (var <= 1e-12) continue;  // constant channel contributes nothing
    fftw_execute(fwd);
    for (auto& z : f) {
      const double re = z[0], im = z[1];
      z[0] = re * re + im * im;
      z[1] = 0;
    }
    fftw_execute(bwd);
    const double r0 = r[0];  // zero-lag power; normalizing by it cancels FFT scaling
    for (int ly = -max_lag; ly <= max_lag; ++ly) {
      const int sy = (ly % H + H) % H;
      for (int lx = -max_lag; lx <= max_lag; ++lx) {
        const int sx = (lx % W + W) % W;
        map.values.at(ly + max_lag, lx + max_lag) +=
            r[static_cast<std::size_t>(sy) * W + sx] / r0;
      }
    }
    ++used_channels;
  }
  fftw_destroy_plan(fwd);
  fftw_destroy_plan(bwd);
  if (used_channels == 0)
    throw std::invalid_argument("autocorrelation: zero variance (constant image)");
  for (int64_t i = 0; i < map.values.numel(); ++i) map.values[i] /= used_channels;
  return map;
}

// ---------------------------------------------------------------------------
// Periodicity peaks: non-strict local maxima above threshold. Equal-valued
// plateau components collapse to their cell nearest the origin, the component
// containing the origin is dropped (handles ridge-shaped autocorrelations of
// one-dimensional patterns), and negated duplicates are removed.
// ---------------------------------------------------------------------------
struct Peak {
  int ly = 0, lx = 0;
  double value = 0;
  double norm() const { return std::sqrt(static_cast<double>(ly) * ly + static_cast<double>(lx) * lx); }
};

inline constexpr double kPeakPlateauEps = 1e-9;  // FFT rounding scale for O(1) values

inline std::vector<Peak> detect_periodicity_peaks(const AutocorrMap& map, double threshold) {
  const int m = map.max_lag;
  const int side = 2 * m + 1;
  auto idx = [side](int y, int x) { return static_cast<std::size_t>(y) * side + x; };
  std::vector<char> candidate(static_cast<std::size_t>(side) * side, 0);
  for (int y = 1; y + 1 < side; ++y) {
    for (int x = 1; x + 1 < side; ++x) {
      const double v = map.values.at(y, x);
      if (v < threshold) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          if (dy == 0 && dx == 0) continue;
          if (map.values.at(y + dy, x + dx) > v + kPeakPlateauEps) {
            is_max = false;
            break;
          }
        }
      if (is_max) candidate[idx(y, x)] = 1;
    }
  }
  // collapse equal-valued (up to FFT rounding) 8-connected plateaus; ridges of
  // one-dimensional patterns become single representatives, and a ridge running
  // through the origin is the trivial self-correlation and is dropped entirely
  std::vector<char> seen(candidate.size(), 0);
  std::vector<Peak> peaks;
  for (int y = 1; y + 1 < side; ++y) {
    for (int x = 1; x + 1 < side; ++x) {
      if (!candidate[idx(y, x)] || seen[idx(y, x)]) continue;
      const double v0 = map.values.at(y, x);
      std::deque<std::pair<int, int>> queue{{y, x}};
      seen[idx(y, x)] = 1;
      bool touches_origin = false;
      Peak best{y - m, x - m, v0};
      while (!queue.empty()) {
        auto [cy, cx] = queue.front();
        queue.pop_front();
        if (cy == m && cx == m) touches_origin = true;
        const Peak cur{cy - m, cx - m, v0};
        if (cur.norm() < best.norm() ||
            (cur.norm() == best.norm() &&
             std::make_pair(cur.ly, cur.lx) < std::make_pair(best.ly, best.lx)))
          best = cur;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = cy + dy, nx = cx + dx;
            if (ny < 0 || ny >= side || nx < 0 || nx >= side) continue;
            if (seen[idx(ny, nx)]) continue;
            if (std::abs(map.values.at(ny, nx) - v0) > kPeakPlateauEps) continue;
            seen[idx(ny, nx)] = 1;
            queue.emplace_back(ny, nx);
          }
      }
      if (touches_origin) continue;
      if (best.ly == 0 && best.lx == 0) continue;
      peaks.push_back(best);
    }
  }
  // canonical half-plane, dedup under negation
  for (auto& p : peaks)
    if (p.ly < 0 || (p.ly == 0 && p.lx < 0)) {
      p.ly = -p.ly;
      p.lx = -p.lx;
    }
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    return std::make_pair(a.ly, a.lx) < std::make_pair(b.ly, b.lx);
  });
  peaks.erase(std::unique(peaks.begin(), peaks.end(),
                          [](const Peak& a, const Peak& b) {
                            return a.ly == b.ly && a.lx == b.lx;
                          }),
              peaks.end());
  // strongest first; values within FFT rounding of each other count as tied
  // and are ordered nearest-to-origin first (quantizing keeps the comparator
  // a strict weak ordering)
  auto bucket = [](double v) { return std::llround(v / kPeakPlateauEps); };
  std::sort(peaks.begin(), peaks.end(), [&](const Peak& a, const Peak& b) {
    if (bucket(a.value) != bucket(b.value)) return a.value > b.value;
    if (a.norm() != b.norm()) return a.norm() < b.norm();
    return std::make_pair(a.ly, a.lx) < std::make_pair(b.ly, b.lx);
  });
  return peaks;
}

// ---------------------------------------------------------------------------
// Learned wave numbers vs. measured image periodicity.
// ---------------------------------------------------------------------------
struct WavenumberMatch {
  int index = 0;
  std::array<double, 2> k{};           // learned wave vector
  std::array<double, 2> period_vec{};  // predicted image-space period vector
  std::array<double, 2> peak{};        // matched autocorrelation peak lag
  double rel_error = 0;
  bool matched = false;
};

struct ConsistencyReport {
  bool aperiodic = false;
  std::vector<WavenumberMatch> matches;

  // 0 when there are no wave-number claims to check; unmatched claims count
  // as a sentinel failure
  double worst_error() const {
    double e = 0;
    for (const auto& m : matches) e = std::max(e, m.matched ? m.rel_error : 1e9);
    return e;
  }

  std::string to_text() const {
    KvDoc doc;
    doc.set_bool("report.aperiodic", aperiodic);
    doc.set_int("report.count", static_cast<int64_t>(matches.size()));
    for (std::size_t i = 0; i < matches.size(); ++i) {
      const auto& m = matches[i];
      const std::string p = "match." + std::to_string(i);
      doc.set(p + ".k", join_reals({m.k[0], m.k[1]}));
      doc.set(p + ".period", join_reals({m.period_vec[0], m.period_vec[1]}));
      doc.set(p + ".peak", join_reals({m.peak[0], m.peak[1]}));
      doc.set_real(p + ".rel_error", m.rel_error);
      doc.set_bool(p + ".matched", m.matched);
    }
    return doc.str();
  }
};

// A plane wave sampled on the integer noise grid is defined only modulo 2*pi
// per component; reduce to the principal Nyquist square before interpreting.
inline double wrap_wavenumber(double k) {
  double w = std::fmod(k + M_PI, 2.0 * M_PI);
  if (w < 0) w += 2.0 * M_PI;
  return w - M_PI;
}

// Image-space period vector of wave vector k: direction k, length
// 2*pi/|k| noise units, each noise unit spanning 2^depth pixels.
inline std::array<double, 2> wave_period_vector(double k0, double k1, int depth) {
  k0 = wrap_wavenumber(k0);
  k1 = wrap_wavenumber(k1);
  const double n2 = k0 * k0 + k1 * k1;
  const double scale = 2.0 * M_PI * static_cast<double>(1 << depth) / n2;
  return {k0 * scale, k1 * scale};
}

inline ConsistencyReport wavenumber_consistency(const SamplerModel& model,
                                                const std::vector<float>& z_g,
                                                const ImageF& image, int max_lag,
                                                double peak_threshold = 0.2) {
  ConsistencyReport rep;
  if (model.noise.d_p == 0) {
    rep.aperiodic = true;
    return rep;
  }
  Tensor<float> K = model.mlp.forward(z_g);
  AutocorrMap map = autocorrelation(image, max_lag);
  std::vector<Peak> peaks = detect_periodicity_peaks(map, peak_threshold);
  if (peaks.empty()) {
    // the model claims periodic structure but the image shows none: report
    // every wave-number column as unmatched
    rep.aperiodic = true;
    for (int i = 0; i < model.noise.d_p; ++i) {
      WavenumberMatch wm;
      wm.index = i;
      wm.k = {static_cast<double>(K.at(0, i)), static_cast<double>(K.at(1, i))};
      const double w0 = wrap_wavenumber(wm.k[0]), w1 = wrap_wavenumber(wm.k[1]);
      if (w0 * w0 + w1 * w1 >= 1e-12)
        wm.period_vec = wave_period_vector(wm.k[0], wm.k[1], model.net.depth);
      wm.matched = false;
      wm.rel_error = 1e9;
      rep.matches.push_back(wm);
    }
    return rep;
  }
  for (int i = 0; i < model.noise.d_p; ++i) {
    WavenumberMatch wm;
    wm.index = i;
    wm.k = {static_cast<double>(K.at(0, i)), static_cast<double>(K.at(1, i))};
    const double w0 = wrap_wavenumber(wm.k[0]), w1 = wrap_wavenumber(wm.k[1]);
    const double n2 = w0 * w0 + w1 * w1;
    if (n2 < 1e-12) {
      wm.matched = false;
      wm.rel_error = 1e9;
      rep.matches.push_back(wm);
      continue;
    }
    wm.period_vec = wave_period_vector(wm.k[0], wm.k[1], model.net.depth);
    double best = 1e300;
    for (const Peak& p : peaks) {
      for (int sgn : {+1, -1}) {
        const double dy = wm.period_vec[0] - sgn * p.ly;
        const double dx = wm.period_vec[1] - sgn * p.lx;
        const double d = std::sqrt(dy * dy + dx * dx);
        if (d < best) {
          best = d;
          wm.peak = {static_cast<double>(sgn * p.ly), static_cast<double>(sgn * p.lx)};
        }
      }
    }
    const double pn = std::sqrt(wm.peak[0] * wm.peak[0] + wm.peak[1] * wm.peak[1]);
    wm.rel_error = pn > 0 ? best / pn : 1e9;
    wm.matched = pn > 0;
    rep.matches.push_back(wm);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Locality probe: flip the local-noise column at one position and bound the
// pixels that change.
// ---------------------------------------------------------------------------
struct LocalityBox {
  bool empty = true;
  int64_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;  // half-open
  int64_t extent_y() const { return empty ? 0 : y1 - y0; }
  int64_t extent_x() const { return empty ? 0 : x1 - x0; }
};

inline LocalityBox locality_probe(const SamplerModel& m, int lambda0, int mu0, int extent_l,
                                  int extent_m, uint64_t seed, bool perturb = true) {
  RenderPlan plan;
  plan.extent_l = extent_l;
  plan.extent_m = extent_m;
  plan.seed = seed;
  NoiseTensor<float> z = build_render_noise(m, plan);
  if (lambda0 < 0 || lambda0 >= extent_l || mu0 < 0 || mu0 >= extent_m)
    throw std::invalid_argument("locality_probe: position outside the noise extent");
  Tensor<float> z2 = z.values;
  if (perturb)
    for (int c = 0; c < m.noise.d_l; ++c) {
      float& v = z2.at(c, lambda0, mu0);
      v = v > 0 ? static_cast<float>(m.noise.prior_low) : static_cast<float>(m.noise.prior_high);
    }
  StableGenerator<float> sg = StableGenerator<float>::from(m.G);
  const int up = 1 << m.net.depth;
  Rect full{0, static_cast<int64_t>(extent_l) * up, 0, static_cast<int64_t>(extent_m) * up};
  Tensor<float> a = sg.render_region(z.values, full, false);
  Tensor<float> b = sg.render_region(z2, full, false);
  LocalityBox box;
  for (int64_t y = 0; y < a.dim(0); ++y)
    for (int64_t x = 0; x < a.dim(1); ++x)
      for (int64_t c = 0; c < 3; ++c)
        if (a.at(y, x, c) != b.at(y, x, c)) {
          if (box.empty) {
            box = {false, y, y + 1, x, x + 1};
          } else {
            box.y0 = std::min(box.y0, y);
            box.y1 = std::max(box.y1, y + 1);
            box.x0 = std::min(box.x0, x);
            box.x1 = std::max(box.x1, x + 1);
          }
        }
  return box;
}

// ---------------------------------------------------------------------------
// Heat-map rendering: map values on a blue-white-red scale with the predicted
// period vectors drawn as red segments from the center.
// ---------------------------------------------------------------------------
inline ImageU8 autocorr_heatmap(const AutocorrMap& map,
                                const std::vector<std::array<double, 2>>& period_vecs) {
  const int side = 2 * map.max_lag + 1;
  const int scale = std::max(1, 512 / side);
  ImageU8 img;
  img.h = img.w = side * scale;
  img.rgb.resize(static_cast<std::size_t>(img.h) * img.w * 3);
  for (int y = 0; y < img.h; ++y) {
    for (int x = 0; x < img.w; ++x) {
      const double v = std::clamp(map.values.at(y / scale, x / scale), -1.0, 1.0);
      unsigned char r, g, b;
      if (v >= 0) {  // white -> red
        r = 255;
        g = b = static_cast<unsigned char>(std::lround(255 * (1 - v)));
      } else {  // white -> blue
        b = 255;
        r = g = static_cast<unsigned char>(std::lround(255 * (1 + v)));
      }
      auto* p = &img.rgb[(static_cast<std::size_t>(y) * img.w + x) * 3];
      p[0] = r;
      p[1] = g;
      p[2] = b;
    }
  }
  const double cy = (map.max_lag + 0.5) * scale, cx = (map.max_lag + 0.5) * scale;
  auto put = [&](int y, int x) {
    if (y < 0 || y >= img.h || x < 0 || x >= img.w) return;
    auto* p = &img.rgb[(static_cast<std::size_t>(y) * img.w + x) * 3];
    p[0] = 220;
    p[1] = 0;
    p[2] = 0;
  };
  for (const auto& pv : period_vecs) {
    const double ey = cy + pv[0] * scale, ex = cx + pv[1] * scale;
    const int steps = static_cast<int>(std::ceil(std::max(std::abs(ey - cy), std::abs(ex - cx)))) + 1;
    for (int s = 0; s <= steps; ++s) {
      const double t = static_cast<double>(s) / steps;
      put(static_cast<int>(std::lround(cy + t * (ey - cy))),
          static_cast<int>(std::lround(cx + t * (ex - cx))));
    }
  }
  return img;
}

}  // namespace psgan
