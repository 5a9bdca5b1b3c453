#include "advsr/ctc.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "advsr/error.h"
#include "advsr/model.h"

namespace advsr::model {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double lse2(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Blank-interleaved label: blank, l1, blank, l2, ..., blank.
std::vector<int> expand(std::span<const int> label, int blank) {
  std::vector<int> ext(2 * label.size() + 1, blank);
  for (std::size_t i = 0; i < label.size(); ++i) ext[2 * i + 1] = label[i];
  return ext;
}

void check_inputs(std::size_t frames, std::size_t vocab, std::span<const int> label, int blank) {
  if (blank < 0 || static_cast<std::size_t>(blank) >= vocab) {
    throw DomainError("ctc: blank id outside vocabulary");
  }
  for (int id : label) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab || id == blank) {
      throw DomainError("ctc: label id " + std::to_string(id) + " is not a writable symbol");
    }
  }
  if (frames == 0) throw InfeasibleLabelError("ctc: zero frames");
  if (!ctc_feasible(frames, label)) {
    throw InfeasibleLabelError("ctc: label needs " + std::to_string(ctc_min_frames(label)) +
                               " frames, only " + std::to_string(frames) + " available");
  }
}

// alpha[t * S + s], log space.
std::vector<double> forward_lattice(std::span<const double> lp, std::size_t T, std::size_t V,
                                    const std::vector<int>& ext) {
  const std::size_t S = ext.size();
  std::vector<double> alpha(T * S, kNegInf);
  alpha[0] = lp[static_cast<std::size_t>(ext[0])];
  if (S > 1) alpha[1] = lp[static_cast<std::size_t>(ext[1])];
  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = &alpha[(t - 1) * S];
    double* cur = &alpha[t * S];
    const double* row = &lp[t * V];
    for (std::size_t s = 0; s < S; ++s) {
      double a = prev[s];
      if (s >= 1) a = lse2(a, prev[s - 1]);
      if (s >= 2 && ext[s] != ext[0] && ext[s] != ext[s - 2]) a = lse2(a, prev[s - 2]);
      cur[s] = a == kNegInf ? kNegInf : a + row[ext[s]];
    }
  }
  return alpha;
}

double total_log_prob(const std::vector<double>& alpha, std::size_t T, std::size_t S) {
  const double* last = &alpha[(T - 1) * S];
  return S > 1 ? lse2(last[S - 1], last[S - 2]) : last[0];
}

}  // namespace

std::size_t ctc_min_frames(std::span<const int> label) {
  std::size_t n = label.size();
  for (std::size_t i = 1; i < label.size(); ++i) {
    if (label[i] == label[i - 1]) ++n;
  }
  return n;
}

bool ctc_feasible(std::size_t frames, std::span<const int> label) {
  return frames >= ctc_min_frames(label) && frames > 0;
}

double ctc_loss(const grad::Matrix& logprobs, std::span<const int> label, int blank) {
  const std::size_t T = logprobs.rows(), V = logprobs.cols();
  check_inputs(T, V, label, blank);
  const auto ext = expand(label, blank);
  const auto alpha = forward_lattice(logprobs.data, T, V, ext);
  const double lp = total_log_prob(alpha, T, ext.size());
  if (!std::isfinite(lp)) throw NumericError("ctc: non-finite log-likelihood");
  return -lp;
}

grad::Tensor ctc_loss(grad::Tensor logprobs, std::span<const int> label, int blank) {
  const std::size_t T = logprobs.rows(), V = logprobs.cols();
  check_inputs(T, V, label, blank);
  const auto ext = expand(label, blank);
  const std::size_t S = ext.size();
  auto alpha = forward_lattice(logprobs.value(), T, V, ext);
  const double log_p = total_log_prob(alpha, T, S);
  if (!std::isfinite(log_p)) throw NumericError("ctc: non-finite log-likelihood");

  const std::size_t in = logprobs.id();
  return logprobs.tape().record(
      "ctc_loss", grad::Shape{1, 1}, {-log_p}, {logprobs},
      [=, alpha = std::move(alpha)](grad::Tape& tape, std::size_t self) {
        const double dy = tape.grad(self)[0];
        const auto lp = tape.value(in);
        // beta[t * S + s] includes the emission at t, like alpha.
        std::vector<double> beta(T * S, kNegInf);
        beta[(T - 1) * S + S - 1] = lp[(T - 1) * V + ext[S - 1]];
        if (S > 1) beta[(T - 1) * S + S - 2] = lp[(T - 1) * V + ext[S - 2]];
        for (std::size_t t = T - 1; t-- > 0;) {
          const double* next = &beta[(t + 1) * S];
          double* cur = &beta[t * S];
          for (std::size_t s = 0; s < S; ++s) {
            double b = next[s];
            if (s + 1 < S) b = lse2(b, next[s + 1]);
            if (s + 2 < S && ext[s] != ext[0] && ext[s] != ext[s + 2]) b = lse2(b, next[s + 2]);
            cur[s] = b == kNegInf ? kNegInf : b + lp[t * V + ext[s]];
          }
        }
        auto g = tape.grad_buffer(in);
        std::vector<double> occ(V);
        for (std::size_t t = 0; t < T; ++t) {
          std::fill(occ.begin(), occ.end(), kNegInf);
          for (std::size_t s = 0; s < S; ++s) {
            const double ab = alpha[t * S + s] + beta[t * S + s];
            occ[ext[s]] = lse2(occ[ext[s]], ab);
          }
          for (std::size_t k = 0; k < V; ++k) {
            if (occ[k] == kNegInf) continue;
            g[t * V + k] -= dy * std::exp(occ[k] - lp[t * V + k] - log_p);
          }
        }
      });
}

std::vector<int> best_path(const grad::Matrix& logprobs) {
  std::vector<int> path(logprobs.rows());
  for (std::size_t t = 0; t < logprobs.rows(); ++t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < logprobs.cols(); ++k) {
      if (logprobs.at(t, k) > logprobs.at(t, best)) best = k;
    }
    path[t] = static_cast<int>(best);
  }
  return path;
}

std::vector<int> collapse(std::span<const int> path, int blank) {
  std::vector<int> out;
  int prev = -1;
  for (int id : path) {
    if (id != prev && id != blank) out.push_back(id);
    prev = id;
  }
  return out;
}

std::string greedy_decode(const grad::Matrix& logprobs, const Vocabulary& vocab) {
  if (logprobs.cols() != vocab.size()) {
    throw ShapeError("greedy_decode: matrix width does not match vocabulary");
  }
  const auto ids = collapse(best_path(logprobs), Vocabulary::blank_id());
  return vocab.decode(ids);
}

}  // namespace advsr::model
