#ifndef ADVSR_CTC_H_
#define ADVSR_CTC_H_

#include <span>
#include <string>
#include <vector>

#include "advsr/grad.h"

namespace advsr::model {

class Vocabulary;

// Frames needed to emit `label`: one per token plus a blank between equal
// neighbours.
std::size_t ctc_min_frames(std::span<const int> label);
bool ctc_feasible(std::size_t frames, std::span<const int> label);

// Negative log-likelihood of `label` under T x V per-frame log-probabilities,
// summed over every alignment that collapses to it (forward algorithm over
// the blank-interleaved lattice, log space). Throws InfeasibleLabelError when
// T is too short. The backward rule uses the matching beta recursion.
grad::Tensor ctc_loss(grad::Tensor logprobs, std::span<const int> label, int blank = 0);
double ctc_loss(const grad::Matrix& logprobs, std::span<const int> label, int blank = 0);

// Per-frame argmax (lowest index on ties).
std::vector<int> best_path(const grad::Matrix& logprobs);
// Collapse repeats, then drop blanks.
std::vector<int> collapse(std::span<const int> path, int blank = 0);
std::string greedy_decode(const grad::Matrix& logprobs, const Vocabulary& vocab);

}  // namespace advsr::model

#endif  // ADVSR_CTC_H_
