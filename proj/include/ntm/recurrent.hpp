#pragma once

#include <string>
#include <vector>

#include "ntm/rng.hpp"
#include "ntm/tape.hpp"

namespace ntm {

// One LSTM cell as tape variables: four gate blocks (input, forget, output,
// candidate), each an input projection [I×H], a recurrent projection [H×H],
// and a bias [H].
struct LstmCellVars {
  Var wx_i, wh_i, b_i;
  Var wx_f, wh_f, b_f;
  Var wx_o, wh_o, b_o;
  Var wx_g, wh_g, b_g;
};

struct RecurrentState {
  Var h;  // [1×H]
  Var c;  // [1×H]
};

// Standard recurrence: gates from affine maps of (input, h); c' = f⊙c + i⊙g;
// h' = o⊙tanh(c'). Shape mismatches surface as dimension errors from the
// underlying ops.
RecurrentState lstm_step(const LstmCellVars& cell, const RecurrentState& state,
                         Var input);

// Next topic vector: the h-output of one lstm_step from a zero cell state,
// feeding t_prev as the input. Repeated application generates the dynamic
// topic sequence.
Var rnn_topic_step(const LstmCellVars& cell, Var t_prev);

// Initial tensors for one cell, keyed by canonical suffix ("wx_i", "wh_i",
// "b_i", ... gate order i, f, o, g). Weights are N(0, 0.02²); biases zero
// except the forget bias, which starts at 1 to keep early recurrences from
// forgetting everything.
struct LstmParamInit {
  std::string suffix;
  Tensor value;
};
std::vector<LstmParamInit> lstm_init(std::size_t input, std::size_t hidden,
                                     Rng& rng);

// Rebuilds the Var bundle from leaves bound in lstm_init order.
LstmCellVars lstm_from_vars(const std::vector<Var>& vars);

}  // namespace ntm
