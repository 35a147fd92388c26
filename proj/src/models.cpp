#include "declmi/models.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "declmi/utf8.hpp"

namespace declmi::models {

void ConditioningSpec::validate() const {
  if (!use_form && !use_meaning)
    throw std::invalid_argument("ConditioningSpec: at least one of form/meaning required");
  if (use_form && use_meaning && pca_k < 1)
    throw std::invalid_argument("ConditioningSpec: pca_k must be >= 1");
}

std::string ConditioningSpec::name() const {
  std::string s = "q(c|";
  bool first = true;
  auto append = [&](const char* v) {
    if (!first) s += ",";
    s += v;
    first = false;
  };
  if (use_form) append("w");
  if (use_meaning) append("v");
  if (use_gender) append("g");
  s += ")";
  return s;
}

namespace {

void init_uniform(Matrix& m, double scale, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-scale, scale);
}

double fan_in_scale(Eigen::Index fan_in) {
  return 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
}

}  // namespace

MlpClassifier MlpClassifier::init(int input_dim, int gender_count, int gender_dim, int hidden,
                                  int depth, int n_classes, Rng& rng) {
  if (input_dim < 1 || n_classes < 1 || depth < 0)
    throw std::invalid_argument("MlpClassifier: bad dimensions");
  if (depth > 0 && hidden < 1) throw std::invalid_argument("MlpClassifier: bad hidden size");
  MlpClassifier m;
  m.input_dim = input_dim;
  m.gender_dim = gender_dim;
  m.hidden = hidden;
  m.depth = depth;
  m.n_classes = n_classes;

  const int full_input = input_dim + gender_dim;
  if (gender_dim > 0) {
    Matrix& ge = m.params.add("gender_embed", gender_count, gender_dim);
    init_uniform(ge, 0.1, rng);
  }
  int prev = full_input;
  for (int l = 0; l < depth; ++l) {
    Matrix& W = m.params.add("layer" + std::to_string(l) + ".W", hidden, prev);
    init_uniform(W, fan_in_scale(prev), rng);
    m.params.add("layer" + std::to_string(l) + ".b", hidden, 1);
    prev = hidden;
  }
  Matrix& Wo = m.params.add("out.W", n_classes, prev);
  init_uniform(Wo, fan_in_scale(prev), rng);
  m.params.add("out.b", n_classes, 1);
  return m;
}

namespace {

struct MlpTrace {
  Vector input;                 // [v ; gender embedding]
  std::vector<Vector> pre;      // pre-activations per hidden layer
  std::vector<Vector> post;     // ReLU outputs per hidden layer
  Vector logits;
};

MlpTrace mlp_run(const MlpClassifier& m, const Vector& v, std::optional<int> gender) {
  if (v.size() != m.input_dim)
    throw std::invalid_argument("mlp_forward: meaning vector dimension mismatch");
  if ((m.gender_dim > 0) != gender.has_value())
    throw std::invalid_argument("mlp_forward: gender presence does not match the model");

  MlpTrace tr;
  tr.input.resize(m.input_dim + m.gender_dim);
  tr.input.head(m.input_dim) = v;
  if (m.gender_dim > 0) {
    const Matrix& ge = m.params.at("gender_embed");
    if (*gender < 0 || *gender >= ge.rows())
      throw std::invalid_argument("mlp_forward: gender id out of range");
    tr.input.tail(m.gender_dim) = ge.row(*gender).transpose();
  }

  Vector h = tr.input;
  for (int l = 0; l < m.depth; ++l) {
    const Matrix& W = m.params.at("layer" + std::to_string(l) + ".W");
    const Vector b = m.params.at("layer" + std::to_string(l) + ".b").col(0);
    Vector z = W * h + b;
    tr.pre.push_back(z);
    h = z.cwiseMax(0.0);
    tr.post.push_back(h);
  }
  tr.logits = m.params.at("out.W") * h + m.params.at("out.b").col(0);
  return tr;
}

}  // namespace

Vector MlpClassifier::forward(const Vector& v, std::optional<int> gender) const {
  const MlpTrace tr = mlp_run(*this, v, gender);
  return numerics::softmax_cross_entropy(tr.logits, 0).probs;
}

double MlpClassifier::loss_grad(const Vector& v, std::optional<int> gender, int target,
                                ParamBundle& grads) const {
  const MlpTrace tr = mlp_run(*this, v, gender);
  const auto sm = numerics::softmax_cross_entropy(tr.logits, target);

  const Vector& top = depth > 0 ? tr.post.back() : tr.input;
  grads.at("out.W") += sm.grad * top.transpose();
  grads.at("out.b").col(0) += sm.grad;
  Vector dh = params.at("out.W").transpose() * sm.grad;

  for (int l = depth - 1; l >= 0; --l) {
    Vector dz = (tr.pre[static_cast<std::size_t>(l)].array() > 0.0)
                    .select(dh.array(), 0.0)
                    .matrix();
    const Vector& below = l > 0 ? tr.post[static_cast<std::size_t>(l) - 1] : tr.input;
    grads.at("layer" + std::to_string(l) + ".W") += dz * below.transpose();
    grads.at("layer" + std::to_string(l) + ".b").col(0) += dz;
    dh = params.at("layer" + std::to_string(l) + ".W").transpose() * dz;
  }

  if (gender_dim > 0)
    grads.at("gender_embed").row(*gender) += dh.tail(gender_dim).transpose();
  return sm.loss_nats;
}

Vector TrainedModel::predict(const Lexeme& lx) const {
  if (std::holds_alternative<MlpClassifier>(model)) {
    const auto& mlp = std::get<MlpClassifier>(model);
    std::optional<int> g;
    if (spec.use_gender) g = lx.gender_id;
    return mlp.forward(lx.vector, g);
  }
  const auto& lstm = std::get<LstmClassifier>(model);
  std::vector<int> ids;
  ids.reserve(lx.graphemes.size());
  for (char32_t cp : lx.graphemes) ids.push_back(alphabet.id_of(cp));
  std::optional<int> g;
  if (spec.use_gender) g = lx.gender_id;
  std::optional<Vector> meaning;
  if (spec.use_meaning) {
    if (!pca) throw std::runtime_error("TrainedModel: meaning conditioning without a PCA model");
    meaning = numerics::pca_transform(*pca, lx.vector);
  }
  return lstm.forward(ids, g, meaning);
}

estimation::Predictor TrainedModel::predictor() const {
  return [this](const Lexeme& lx) { return predict(lx); };
}

namespace {

nlohmann::json spec_to_json(const ConditioningSpec& s) {
  return {{"use_form", s.use_form},
          {"use_meaning", s.use_meaning},
          {"use_gender", s.use_gender},
          {"pca_k", s.pca_k}};
}

ConditioningSpec spec_from_json(const nlohmann::json& j) {
  ConditioningSpec s;
  s.use_form = j.at("use_form").get<bool>();
  s.use_meaning = j.at("use_meaning").get<bool>();
  s.use_gender = j.at("use_gender").get<bool>();
  s.pca_k = j.at("pca_k").get<int>();
  return s;
}

nlohmann::json hyper_to_json(const TrainHyper& h) {
  return {{"epochs", h.epochs},         {"hidden", h.hidden},
          {"layers", h.layers},         {"learning_rate", h.learning_rate},
          {"batch_size", h.batch_size}, {"pca_k", h.pca_k},
          {"grapheme_embed", h.grapheme_embed}, {"gender_embed", h.gender_embed}};
}

TrainHyper hyper_from_json(const nlohmann::json& j) {
  TrainHyper h;
  h.epochs = j.at("epochs").get<int>();
  h.hidden = j.at("hidden").get<int>();
  h.layers = j.at("layers").get<int>();
  h.learning_rate = j.at("learning_rate").get<double>();
  h.batch_size = j.at("batch_size").get<int>();
  h.pca_k = j.at("pca_k").get<int>();
  h.grapheme_embed = j.at("grapheme_embed").get<int>();
  h.gender_embed = j.at("gender_embed").get<int>();
  return h;
}

}  // namespace

void TrainedModel::save(const std::string& prefix) const {
  ParamBundle snapshot;
  const ParamBundle& live =
      std::holds_alternative<MlpClassifier>(model) ? std::get<MlpClassifier>(model).params
                                                   : std::get<LstmClassifier>(model).params;
  for (std::size_t i = 0; i < live.size(); ++i)
    snapshot.add(live.name(i), live.value(i).rows(), live.value(i).cols()) = live.value(i);
  if (pca) {
    snapshot.add("pca.mean", pca->mean.size(), 1).col(0) = pca->mean;
    snapshot.add("pca.projection", pca->projection.rows(), pca->projection.cols()) =
        pca->projection;
  }
  snapshot.save(prefix + ".params");

  nlohmann::json j;
  j["spec"] = spec_to_json(spec);
  j["hyper"] = hyper_to_json(hyper);
  j["class_names"] = class_names;
  j["gender_names"] = gender_names;
  j["seed"] = meta.seed;
  j["best_epoch"] = meta.best_epoch;
  j["epochs_run"] = meta.epochs_run;
  j["best_validation_nats"] = meta.best_validation_nats;
  std::vector<std::string> symbols;
  for (char32_t cp : alphabet.symbols()) symbols.push_back(utf8::encode_one(cp));
  j["alphabet"] = symbols;
  if (pca) j["pca_retained_variance"] = pca->retained_variance;
  if (std::holds_alternative<MlpClassifier>(model)) {
    const auto& m = std::get<MlpClassifier>(model);
    j["family"] = "mlp";
    j["dims"] = {{"input_dim", m.input_dim}, {"gender_dim", m.gender_dim},
                 {"hidden", m.hidden},       {"depth", m.depth},
                 {"n_classes", m.n_classes}};
  } else {
    const auto& m = std::get<LstmClassifier>(model);
    j["family"] = "lstm";
    j["dims"] = {{"alphabet_size", m.alphabet_size}, {"embed_dim", m.embed_dim},
                 {"hidden", m.hidden},               {"layers", m.layers},
                 {"n_classes", m.n_classes},         {"use_gender", m.use_gender},
                 {"meaning_dim", m.meaning_dim}};
  }
  std::ofstream os(prefix + ".json");
  if (!os) throw std::runtime_error("cannot write " + prefix + ".json");
  os << j.dump(2) << "\n";
}

TrainedModel TrainedModel::load(const std::string& prefix) {
  std::ifstream is(prefix + ".json");
  if (!is) throw std::runtime_error("cannot read " + prefix + ".json");
  nlohmann::json j;
  is >> j;
  ParamBundle stored = ParamBundle::load(prefix + ".params");

  TrainedModel out;
  out.spec = spec_from_json(j.at("spec"));
  out.hyper = hyper_from_json(j.at("hyper"));
  out.class_names = j.at("class_names").get<std::vector<std::string>>();
  out.gender_names = j.at("gender_names").get<std::vector<std::string>>();
  out.meta.seed = j.at("seed").get<std::uint64_t>();
  out.meta.best_epoch = j.at("best_epoch").get<int>();
  out.meta.epochs_run = j.at("epochs_run").get<int>();
  out.meta.best_validation_nats = j.at("best_validation_nats").get<double>();

  std::vector<char32_t> graphemes;
  const auto symbols = j.at("alphabet").get<std::vector<std::string>>();
  for (std::size_t i = 1; i < symbols.size(); ++i) {  // index 0 is the UNK placeholder
    const auto cps = utf8::decode(symbols[i]);
    if (cps.size() != 1) throw std::runtime_error("model sidecar: bad alphabet entry");
    graphemes.push_back(cps[0]);
  }
  out.alphabet = Alphabet::from_graphemes(graphemes);

  const auto& dims = j.at("dims");
  Rng dummy(0);
  if (j.at("family") == "mlp") {
    const int gender_dim = dims.at("gender_dim").get<int>();
    MlpClassifier m = MlpClassifier::init(
        dims.at("input_dim").get<int>(),
        gender_dim > 0 ? static_cast<int>(out.gender_names.size()) : 1, gender_dim,
        dims.at("hidden").get<int>(), dims.at("depth").get<int>(),
        dims.at("n_classes").get<int>(), dummy);
    out.model = std::move(m);
  } else {
    LstmClassifier m = LstmClassifier::init(
        dims.at("alphabet_size").get<int>(), dims.at("embed_dim").get<int>(),
        dims.at("hidden").get<int>(), dims.at("layers").get<int>(),
        dims.at("n_classes").get<int>(), static_cast<int>(out.gender_names.size()),
        dims.at("use_gender").get<bool>(), dims.at("meaning_dim").get<int>(), dummy);
    out.model = std::move(m);
  }

  ParamBundle& live = std::holds_alternative<MlpClassifier>(out.model)
                          ? std::get<MlpClassifier>(out.model).params
                          : std::get<LstmClassifier>(out.model).params;
  for (std::size_t i = 0; i < live.size(); ++i) {
    const Matrix& src = stored.at(live.name(i));
    if (src.rows() != live.value(i).rows() || src.cols() != live.value(i).cols())
      throw std::runtime_error("model checkpoint: shape mismatch for " + live.name(i));
    live.value(i) = src;
  }
  if (stored.has("pca.mean")) {
    PCAModel p;
    p.mean = stored.at("pca.mean").col(0);
    p.projection = stored.at("pca.projection");
    p.retained_variance = j.value("pca_retained_variance", 0.0);
    out.pca = p;
  }
  return out;
}

}  // namespace declmi::models
