#include <cmath>
#include <stdexcept>

#include "declmi/models.hpp"

namespace declmi::models {

namespace {

// 0.5*(tanh(x/2)+1) is sigmoid without overflow at either tail.
inline Vector sigmoid(const Vector& x) {
  return (0.5 * ((x * 0.5).array().tanh() + 1.0)).matrix();
}

struct LayerTrace {
  std::vector<Vector> input;  // per step
  std::vector<Vector> gate_i, gate_f, gate_g, gate_o;
  std::vector<Vector> cell, cell_tanh, hidden;
  Vector h0;
};

}  // namespace

struct LstmBackward {
  // Runs forward storing per-step caches; optionally continues into the
  // gradient accumulation.
  static std::vector<LayerTrace> forward(const LstmClassifier& m, const std::vector<int>& ids,
                                         std::optional<int> gender,
                                         const std::optional<Vector>& meaning, Vector& logits) {
    if (ids.empty()) throw std::invalid_argument("lstm_forward: empty grapheme sequence");
    for (int id : ids)
      if (id < 0 || id >= m.alphabet_size)
        throw std::invalid_argument("lstm_forward: grapheme id out of range");
    if (m.use_gender != gender.has_value())
      throw std::invalid_argument("lstm_forward: gender presence does not match the model");
    if (m.use_meaning() != meaning.has_value())
      throw std::invalid_argument("lstm_forward: meaning presence does not match the model");
    if (meaning && meaning->size() != m.meaning_dim)
      throw std::invalid_argument("lstm_forward: meaning vector dimension mismatch");
    if (gender && (*gender < 0 || *gender >= m.params.at("gender_embed").rows()))
      throw std::invalid_argument("lstm_forward: gender id out of range");

    const int h = m.hidden;
    const std::size_t T = ids.size();
    const Vector h0 = m.initial_hidden(gender, meaning);

    std::vector<LayerTrace> traces(static_cast<std::size_t>(m.layers));
    const Matrix& embed = m.params.at("embed");

    std::vector<Vector> inputs(T);
    for (std::size_t t = 0; t < T; ++t)
      inputs[t] = embed.row(ids[t]).transpose();

    for (int l = 0; l < m.layers; ++l) {
      LayerTrace& tr = traces[static_cast<std::size_t>(l)];
      const Matrix& W = m.params.at("lstm" + std::to_string(l) + ".W");
      const Matrix& R = m.params.at("lstm" + std::to_string(l) + ".R");
      const Vector b = m.params.at("lstm" + std::to_string(l) + ".b").col(0);
      tr.h0 = h0;
      tr.input = inputs;
      Vector h_prev = h0;
      Vector c_prev = Vector::Zero(h);
      for (std::size_t t = 0; t < T; ++t) {
        const Vector a = W * tr.input[t] + R * h_prev + b;
        Vector gi = sigmoid(a.head(h));
        Vector gf = sigmoid(a.segment(h, h));
        Vector gg = a.segment(2 * h, h).array().tanh().matrix();
        Vector go = sigmoid(a.tail(h));
        Vector c = gf.cwiseProduct(c_prev) + gi.cwiseProduct(gg);
        Vector ct = c.array().tanh().matrix();
        Vector hh = go.cwiseProduct(ct);
        tr.gate_i.push_back(std::move(gi));
        tr.gate_f.push_back(std::move(gf));
        tr.gate_g.push_back(std::move(gg));
        tr.gate_o.push_back(std::move(go));
        tr.cell.push_back(c);
        tr.cell_tanh.push_back(std::move(ct));
        tr.hidden.push_back(hh);
        h_prev = tr.hidden.back();
        c_prev = tr.cell.back();
      }
      inputs = tr.hidden;
    }

    logits = m.params.at("out.W") * traces.back().hidden.back() +
             m.params.at("out.b").col(0);
    return traces;
  }

  static double backward(const LstmClassifier& m, const std::vector<int>& ids,
                         std::optional<int> gender, const std::optional<Vector>& meaning,
                         int target, ParamBundle& grads) {
    Vector logits;
    const std::vector<LayerTrace> traces = forward(m, ids, gender, meaning, logits);
    const auto sm = numerics::softmax_cross_entropy(logits, target);

    const int h = m.hidden;
    const std::size_t T = ids.size();

    grads.at("out.W") += sm.grad * traces.back().hidden.back().transpose();
    grads.at("out.b").col(0) += sm.grad;

    // dh flowing into each step of the current layer from the layer above
    // (or the output head for the top layer).
    std::vector<Vector> dh_above(T, Vector::Zero(h));
    dh_above[T - 1] = m.params.at("out.W").transpose() * sm.grad;

    Vector dh0_total = Vector::Zero(h);

    for (int l = m.layers - 1; l >= 0; --l) {
      const LayerTrace& tr = traces[static_cast<std::size_t>(l)];
      const Matrix& W = m.params.at("lstm" + std::to_string(l) + ".W");
      const Matrix& R = m.params.at("lstm" + std::to_string(l) + ".R");
      Matrix& dW = grads.at("lstm" + std::to_string(l) + ".W");
      Matrix& dR = grads.at("lstm" + std::to_string(l) + ".R");
      Matrix& db = grads.at("lstm" + std::to_string(l) + ".b");

      std::vector<Vector> dinput(T);
      Vector dc = Vector::Zero(h);
      Vector dh_rec = Vector::Zero(h);  // recurrent dh into step t
      for (std::size_t ti = T; ti-- > 0;) {
        const Vector dh = dh_above[ti] + dh_rec;
        const Vector& gi = tr.gate_i[ti];
        const Vector& gf = tr.gate_f[ti];
        const Vector& gg = tr.gate_g[ti];
        const Vector& go = tr.gate_o[ti];
        const Vector& ct = tr.cell_tanh[ti];

        const Vector d_o = dh.cwiseProduct(ct);
        dc += dh.cwiseProduct(go).cwiseProduct(
            (1.0 - ct.array().square()).matrix());
        const Vector d_i = dc.cwiseProduct(gg);
        const Vector d_g = dc.cwiseProduct(gi);
        const Vector c_prev = ti > 0 ? tr.cell[ti - 1] : Vector::Zero(h);
        const Vector d_f = dc.cwiseProduct(c_prev);

        Vector da(4 * h);
        da.head(h) = d_i.array() * gi.array() * (1.0 - gi.array());
        da.segment(h, h) = d_f.array() * gf.array() * (1.0 - gf.array());
        da.segment(2 * h, h) = d_g.array() * (1.0 - gg.array().square());
        da.tail(h) = d_o.array() * go.array() * (1.0 - go.array());

        const Vector& h_prev = ti > 0 ? tr.hidden[ti - 1] : tr.h0;
        dW += da * tr.input[ti].transpose();
        dR += da * h_prev.transpose();
        db.col(0) += da;
        dinput[ti] = W.transpose() * da;

        dc = dc.cwiseProduct(gf);
        dh_rec = R.transpose() * da;
      }
      dh0_total += dh_rec;

      if (l > 0) {
        dh_above = std::move(dinput);
      } else {
        Matrix& dembed = grads.at("embed");
        for (std::size_t t = 0; t < T; ++t)
          dembed.row(ids[t]) += dinput[t].transpose();
      }
    }

    // Route the initial-hidden gradient into the conditioning parameters.
    if (m.use_meaning() && m.use_gender) {
      const int hm = m.meaning_half();
      grads.at("meaning.W") += dh0_total.head(hm) * meaning->transpose();
      grads.at("meaning.b").col(0) += dh0_total.head(hm);
      grads.at("gender_embed").row(*gender) += dh0_total.tail(h - hm).transpose();
    } else if (m.use_meaning()) {
      grads.at("meaning.W") += dh0_total * meaning->transpose();
      grads.at("meaning.b").col(0) += dh0_total;
    } else if (m.use_gender) {
      grads.at("gender_embed").row(*gender) += dh0_total.transpose();
    }
    return sm.loss_nats;
  }
};

LstmClassifier LstmClassifier::init(int alphabet_size, int embed_dim, int hidden, int layers,
                                    int n_classes, int gender_count, bool use_gender,
                                    int meaning_dim, Rng& rng) {
  if (alphabet_size < 1 || embed_dim < 1 || hidden < 1 || layers < 1 || n_classes < 1)
    throw std::invalid_argument("LstmClassifier: bad dimensions");
  LstmClassifier m;
  m.alphabet_size = alphabet_size;
  m.embed_dim = embed_dim;
  m.hidden = hidden;
  m.layers = layers;
  m.n_classes = n_classes;
  m.use_gender = use_gender;
  m.meaning_dim = meaning_dim;

  auto uniform_init = [&](Matrix& mat, double scale) {
    for (Eigen::Index r = 0; r < mat.rows(); ++r)
      for (Eigen::Index c = 0; c < mat.cols(); ++c) mat(r, c) = rng.uniform(-scale, scale);
  };

  Matrix& embed = m.params.add("embed", alphabet_size, embed_dim);
  uniform_init(embed, 0.1);
  int in_dim = embed_dim;
  for (int l = 0; l < layers; ++l) {
    Matrix& W = m.params.add("lstm" + std::to_string(l) + ".W", 4 * hidden, in_dim);
    uniform_init(W, 1.0 / std::sqrt(static_cast<double>(in_dim)));
    Matrix& R = m.params.add("lstm" + std::to_string(l) + ".R", 4 * hidden, hidden);
    uniform_init(R, 1.0 / std::sqrt(static_cast<double>(hidden)));
    Matrix& b = m.params.add("lstm" + std::to_string(l) + ".b", 4 * hidden, 1);
    b.block(hidden, 0, hidden, 1).setConstant(1.0);  // forget-gate bias
    in_dim = hidden;
  }
  if (use_gender) {
    Matrix& ge = m.params.add("gender_embed", gender_count, m.gender_part());
    uniform_init(ge, 0.1);
  }
  if (meaning_dim > 0) {
    Matrix& mw = m.params.add("meaning.W", m.meaning_half(), meaning_dim);
    uniform_init(mw, 1.0 / std::sqrt(static_cast<double>(meaning_dim)));
    m.params.add("meaning.b", m.meaning_half(), 1);
  }
  Matrix& wo = m.params.add("out.W", n_classes, hidden);
  uniform_init(wo, 1.0 / std::sqrt(static_cast<double>(hidden)));
  m.params.add("out.b", n_classes, 1);
  return m;
}

Vector LstmClassifier::initial_hidden(std::optional<int> gender,
                                      const std::optional<Vector>& meaning) const {
  Vector h0 = Vector::Zero(hidden);
  if (use_meaning() && use_gender) {
    const int hm = meaning_half();
    h0.head(hm) = params.at("meaning.W") * (*meaning) + params.at("meaning.b").col(0);
    h0.tail(hidden - hm) = params.at("gender_embed").row(*gender).transpose();
  } else if (use_meaning()) {
    h0 = params.at("meaning.W") * (*meaning) + params.at("meaning.b").col(0);
  } else if (use_gender) {
    h0 = params.at("gender_embed").row(*gender).transpose();
  }
  return h0;
}

Vector LstmClassifier::forward(const std::vector<int>& grapheme_ids, std::optional<int> gender,
                               const std::optional<Vector>& meaning) const {
  Vector logits;
  LstmBackward::forward(*this, grapheme_ids, gender, meaning, logits);
  return numerics::softmax_cross_entropy(logits, 0).probs;
}

double LstmClassifier::loss_grad(const std::vector<int>& grapheme_ids, std::optional<int> gender,
                                 const std::optional<Vector>& meaning, int target,
                                 ParamBundle& grads) const {
  return LstmBackward::backward(*this, grapheme_ids, gender, meaning, target, grads);
}

}  // namespace declmi::models
