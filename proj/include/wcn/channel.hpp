#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "wcn/model.hpp"
#include "wcn/rng.hpp"

namespace wcn {

// Complementary CDF of a noncentral chi-square with 2 degrees of freedom,
// expressed as the first-order Marcum Q function Q1(a, b).  Evaluated by the
// Poisson-mixture series; each term pairs a Poisson(a^2/2) weight with a
// Poisson(b^2/2) partial sum.
inline double marcum_q1(double a, double b) {
  if (b <= 0.0) return 1.0;
  const double hl = 0.5 * a * a;
  const double hy = 0.5 * b * b;
  if (hl > 700.0 || hy > 700.0) {
    // Normal approximation of the noncentral chi-square, far outside the
    // parameter range exercised by fading configs.
    const double mean = 2.0 + 2.0 * hl;
    const double var = 2.0 * (2.0 + 4.0 * hl);
    return 0.5 * std::erfc((2.0 * hy - mean) / std::sqrt(2.0 * var));
  }
  double pl = std::exp(-hl);
  double py = std::exp(-hy);
  double cpy = py;
  double sum = pl * cpy;
  double tail = 1.0 - pl;
  for (int k = 1; k < 20000 && tail > 1e-16; ++k) {
    pl *= hl / k;
    py *= hy / k;
    cpy += py;
    sum += pl * cpy;
    tail -= pl;
  }
  return std::clamp(sum, 0.0, 1.0);
}

// P(power gain > x) for the supported fading laws, total mean gain mu.
inline double gain_survival(const ChannelProfile& p, double mu, double x) {
  if (x <= 0.0) return 1.0;
  if (mu <= 0.0) throw ConfigError("nonpositive mean gain");
  switch (p.fading) {
    case FadingKind::rayleigh:
      return std::exp(-x / mu);
    case FadingKind::rician: {
      const double K = p.rice_k;
      return marcum_q1(std::sqrt(2.0 * K),
                       std::sqrt(2.0 * (K + 1.0) * x / mu));
    }
    case FadingKind::discrete:
      throw EngineError("gain_survival: discrete profile has no gain law");
  }
  return 0.0;
}

inline double sample_gain(const ChannelProfile& p, double mu,
                          std::mt19937_64& g) {
  if (mu <= 0.0) throw ConfigError("nonpositive mean gain");
  switch (p.fading) {
    case FadingKind::rayleigh:
      return sample_exponential(g, mu);
    case FadingKind::rician: {
      // LOS amplitude plus circular complex Gaussian; Rice factor K is the
      // LOS/diffuse power ratio and the total mean power equals mu.
      const double K = p.rice_k;
      const double los = std::sqrt(mu * K / (K + 1.0));
      const double sigma = std::sqrt(mu / (2.0 * (K + 1.0)));
      double z0, z1;
      sample_normal_pair(g, z0, z1);
      const double re = los + sigma * z0;
      const double im = sigma * z1;
      return re * re + im * im;
    }
    case FadingKind::discrete:
      throw EngineError("sample_gain: discrete profile has no gain law");
  }
  return 0.0;
}

// State l iff thresholds[l-1] <= g < thresholds[l] (lower bound closed).
inline int discretize(double gain, const std::vector<double>& thresholds) {
  auto it = std::upper_bound(thresholds.begin(), thresholds.end(), gain);
  return static_cast<int>(it - thresholds.begin());
}

// Stationary state probabilities of one link.
inline std::vector<double> state_distribution(const ChannelProfile& p,
                                              double mu) {
  if (p.fading == FadingKind::discrete) return p.state_probs;
  const std::size_t L = p.thresholds.size();
  std::vector<double> probs(L + 1, 0.0);
  double above_prev = 1.0;
  for (std::size_t l = 0; l < L; ++l) {
    const double above = gain_survival(p, mu, p.thresholds[l]);
    probs[l] = above_prev - above;
    above_prev = above;
  }
  probs[L] = above_prev;
  return probs;
}

// Per-link conditional state law: rows[prev][next].  For links without
// channel memory every row equals the stationary distribution.
struct LinkCSI {
  std::vector<std::vector<double>> rows;
  // survival[prev][l] = P(state >= l | prev)
  std::vector<std::vector<double>> survival;

  void finalize() {
    survival.assign(rows.size(), {});
    for (std::size_t p = 0; p < rows.size(); ++p) {
      const auto& r = rows[p];
      std::vector<double> s(r.size() + 1, 0.0);
      for (std::size_t l = r.size(); l-- > 0;) s[l] = s[l + 1] + r[l];
      survival[p] = std::move(s);
    }
  }
};

inline LinkCSI make_link_csi(const ChannelProfile& p, double mu) {
  LinkCSI csi;
  if (!p.transition.empty()) {
    csi.rows = p.transition;
  } else {
    const std::vector<double> pmf = state_distribution(p, mu);
    csi.rows.assign(pmf.size(), pmf);
  }
  csi.finalize();
  return csi;
}

struct ChannelSnapshot {
  std::uint64_t t = 0;
  std::vector<double> gain;
  std::vector<int> state;
};

// Owns one rng stream per link and steps the whole network state each slot.
// Stream names depend only on the endpoints' external ids, so two runs that
// differ in coding scheme or control parameters draw identical gains.
class ChannelProcess {
 public:
  ChannelProcess(const Model& model, const StreamFactory& streams)
      : model_(&model) {
    streams_.reserve(model.links.size());
    csi_.reserve(model.links.size());
    for (const Link& l : model.links) {
      const std::string tag = "link/" + std::to_string(model.nodes[l.tx].id) +
                              "->" + std::to_string(model.nodes[l.rx].id);
      streams_.push_back(streams.stream(tag));
      csi_.push_back(make_link_csi(model.profiles[l.profile], l.mean_gain));
    }
    cur_.gain.assign(model.links.size(), 0.0);
    cur_.state.assign(model.links.size(), 0);
    prev_ = cur_;
  }

  // Realizes the state for slot t.  Links with a transition matrix evolve as
  // a Markov chain over state indices (the gain is then only a label drawn
  // inside the state's interval); all other links are sampled i.i.d.
  const ChannelSnapshot& step(std::uint64_t t) {
    std::swap(prev_, cur_);
    cur_.t = t;
    for (std::size_t li = 0; li < model_->links.size(); ++li) {
      const Link& link = model_->links[li];
      const ChannelProfile& p = model_->profiles[link.profile];
      auto& g = streams_[li];
      int s;
      double gain;
      if (!p.transition.empty()) {
        const std::vector<double>& row =
            t == 0 ? p.state_probs
                   : p.transition[static_cast<std::size_t>(prev_.state[li])];
        s = draw_state(row, g);
        gain = interval_gain(p, s, g);
      } else if (p.fading == FadingKind::discrete) {
        s = draw_state(p.state_probs, g);
        gain = interval_gain(p, s, g);
      } else {
        gain = sample_gain(p, link.mean_gain, g);
        s = discretize(gain, p.thresholds);
      }
      cur_.gain[li] = gain;
      cur_.state[li] = s;
      checksum_.add(gain);
    }
    return cur_;
  }

  const ChannelSnapshot& current() const { return cur_; }
  const ChannelSnapshot& previous() const { return prev_; }
  const LinkCSI& csi(std::size_t link) const { return csi_[link]; }
  std::uint64_t gain_checksum() const { return checksum_.value(); }

 private:
  static int draw_state(const std::vector<double>& pmf, std::mt19937_64& g) {
    const double u = uniform01(g);
    double acc = 0.0;
    for (std::size_t l = 0; l < pmf.size(); ++l) {
      acc += pmf[l];
      if (u < acc) return static_cast<int>(l);
    }
    return static_cast<int>(pmf.size()) - 1;
  }

  static double interval_gain(const ChannelProfile& p, int s,
                              std::mt19937_64& g) {
    // Logging label only; rates depend on the state index.
    const auto& th = p.thresholds;
    if (th.empty()) return static_cast<double>(s) + uniform01(g) - 0.5;
    const std::size_t L = th.size();
    const std::size_t idx = static_cast<std::size_t>(s);
    double lo, hi;
    if (idx == 0) {
      lo = 0.0;
      hi = th[0];
    } else if (idx == L) {
      lo = th[L - 1];
      hi = th[L - 1] + (L >= 2 ? th[L - 1] - th[L - 2] : th[L - 1]);
    } else {
      lo = th[idx - 1];
      hi = th[idx];
    }
    return lo + (hi - lo) * uniform01(g);
  }

  const Model* model_;
  std::vector<std::mt19937_64> streams_;
  std::vector<LinkCSI> csi_;
  ChannelSnapshot prev_, cur_;
  BitChecksum checksum_;
};

}  // namespace wcn
