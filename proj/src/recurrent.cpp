#include "ntm/recurrent.hpp"

#include "ntm/errors.hpp"

namespace ntm {

namespace {

Var gate_preact(Var input, Var wx, Var h, Var wh, Var b) {
  return add_rowvec(add(matmul(input, wx), matmul(h, wh)), b);
}

}  // namespace

RecurrentState lstm_step(const LstmCellVars& cell, const RecurrentState& state,
                         Var input) {
  const Var i = sigmoid(gate_preact(input, cell.wx_i, state.h, cell.wh_i, cell.b_i));
  const Var f = sigmoid(gate_preact(input, cell.wx_f, state.h, cell.wh_f, cell.b_f));
  const Var o = sigmoid(gate_preact(input, cell.wx_o, state.h, cell.wh_o, cell.b_o));
  const Var g = tanh(gate_preact(input, cell.wx_g, state.h, cell.wh_g, cell.b_g));
  const Var c_next = add(mul(f, state.c), mul(i, g));
  return {mul(o, tanh(c_next)), c_next};
}

Var rnn_topic_step(const LstmCellVars& cell, Var t_prev) {
  Tape* tape = t_prev.tape();
  if (!tape) throw ContractError("rnn_topic_step: unbound topic vector");
  const std::size_t H = cell.wh_i.value().rows();
  const RecurrentState zero{tape->constant(Tensor({1, H})),
                            tape->constant(Tensor({1, H}))};
  return lstm_step(cell, zero, t_prev).h;
}

std::vector<LstmParamInit> lstm_init(std::size_t input, std::size_t hidden,
                                     Rng& rng) {
  if (input < 1 || hidden < 1)
    throw ContractError("lstm_init: sizes must be positive");
  std::vector<LstmParamInit> out;
  for (const char* gate : {"i", "f", "o", "g"}) {
    out.push_back({std::string("wx_") + gate,
                   Tensor::random_normal({input, hidden}, rng, 0.02)});
    out.push_back({std::string("wh_") + gate,
                   Tensor::random_normal({hidden, hidden}, rng, 0.02)});
    Tensor b({hidden});
    if (gate[0] == 'f') b = Tensor::full({hidden}, 1.0);
    out.push_back({std::string("b_") + gate, std::move(b)});
  }
  return out;
}

LstmCellVars lstm_from_vars(const std::vector<Var>& vars) {
  if (vars.size() != 12)
    throw ContractError("lstm_from_vars: expected 12 parameter blocks, got " +
                        std::to_string(vars.size()));
  LstmCellVars c;
  c.wx_i = vars[0];
  c.wh_i = vars[1];
  c.b_i = vars[2];
  c.wx_f = vars[3];
  c.wh_f = vars[4];
  c.b_f = vars[5];
  c.wx_o = vars[6];
  c.wh_o = vars[7];
  c.b_o = vars[8];
  c.wx_g = vars[9];
  c.wh_g = vars[10];
  c.b_g = vars[11];
  return c;
}

}  // namespace ntm
