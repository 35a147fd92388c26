#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "declmi/models.hpp"

namespace declmi::models {

namespace {

struct Example {
  std::vector<int> ids;            // recurrent input
  const Vector* meaning_raw = nullptr;
  Vector meaning_compressed;       // PCA output, combined model only
  std::optional<int> gender;
  int target = 0;
};

std::vector<Example> prepare(const std::vector<Lexeme>& lexemes, const Dataset& context,
                             const ConditioningSpec& spec, const std::optional<PCAModel>& pca) {
  std::vector<Example> out;
  out.reserve(lexemes.size());
  for (const Lexeme& lx : lexemes) {
    Example ex;
    ex.target = lx.class_id;
    if (spec.use_gender) ex.gender = lx.gender_id;
    if (spec.use_form) {
      ex.ids.reserve(lx.graphemes.size());
      for (char32_t cp : lx.graphemes) ex.ids.push_back(context.alphabet.id_of(cp));
    }
    if (spec.use_meaning) {
      if (pca) ex.meaning_compressed = numerics::pca_transform(*pca, lx.vector);
      else ex.meaning_raw = &lx.vector;
    }
    out.push_back(std::move(ex));
  }
  return out;
}

double example_loss_grad(const TrainedModel& tm, const Example& ex, ParamBundle& grads) {
  if (std::holds_alternative<MlpClassifier>(tm.model)) {
    return std::get<MlpClassifier>(tm.model).loss_grad(*ex.meaning_raw, ex.gender, ex.target,
                                                       grads);
  }
  const auto& lstm = std::get<LstmClassifier>(tm.model);
  std::optional<Vector> meaning;
  if (lstm.use_meaning()) meaning = ex.meaning_compressed;
  return lstm.loss_grad(ex.ids, ex.gender, meaning, ex.target, grads);
}

double example_loss(const TrainedModel& tm, const Example& ex) {
  Vector probs;
  if (std::holds_alternative<MlpClassifier>(tm.model)) {
    probs = std::get<MlpClassifier>(tm.model).forward(*ex.meaning_raw, ex.gender);
  } else {
    const auto& lstm = std::get<LstmClassifier>(tm.model);
    std::optional<Vector> meaning;
    if (lstm.use_meaning()) meaning = ex.meaning_compressed;
    probs = lstm.forward(ex.ids, ex.gender, meaning);
  }
  const double p = probs[ex.target];
  if (!(p > 0.0)) throw std::runtime_error("train_classifier: zero probability on an example");
  return -std::log(p);
}

ParamBundle& live_params(TrainedModel& tm) {
  return std::holds_alternative<MlpClassifier>(tm.model)
             ? std::get<MlpClassifier>(tm.model).params
             : std::get<LstmClassifier>(tm.model).params;
}

ParamBundle copy_bundle(const ParamBundle& src) {
  ParamBundle out = src.zeros_like();
  for (std::size_t i = 0; i < src.size(); ++i) out.value(i) = src.value(i);
  return out;
}

}  // namespace

TrainedModel train_classifier(const std::vector<Lexeme>& train, const std::vector<Lexeme>& valid,
                              const Dataset& context, const ConditioningSpec& spec,
                              const TrainHyper& hyper, std::uint64_t seed) {
  spec.validate();
  if (train.empty() || valid.empty())
    throw std::invalid_argument("train_classifier: empty train or validation list");
  if (hyper.epochs < 1 || hyper.batch_size < 1)
    throw std::invalid_argument("train_classifier: bad hyperparameters");

  TrainedModel tm;
  tm.spec = spec;
  tm.hyper = hyper;
  tm.alphabet = context.alphabet;
  tm.class_names = context.class_names;
  tm.gender_names = context.gender_names;
  tm.meta.seed = seed;

  Rng rng(derive_seed(seed, 0x747261696e /* "train" */));

  // Combined form+meaning models compress the meaning vector first; the
  // projection is fit on the training portion only.
  if (spec.use_form && spec.use_meaning) {
    const int k = std::min<int>(spec.pca_k, context.dim);
    Matrix X(static_cast<Eigen::Index>(train.size()), context.dim);
    for (std::size_t i = 0; i < train.size(); ++i)
      X.row(static_cast<Eigen::Index>(i)) = train[i].vector.transpose();
    tm.pca = numerics::pca_fit(X, k);
  }

  const int K = context.n_classes();
  if (spec.use_form) {
    const int meaning_dim = spec.use_meaning ? static_cast<int>(tm.pca->output_dim()) : 0;
    tm.model = LstmClassifier::init(context.alphabet.size(), hyper.grapheme_embed, hyper.hidden,
                                    hyper.layers, K, context.n_genders(), spec.use_gender,
                                    meaning_dim, rng);
  } else {
    tm.model = MlpClassifier::init(context.dim, context.n_genders(),
                                   spec.use_gender ? hyper.gender_embed : 0, hyper.hidden,
                                   hyper.layers, K, rng);
  }

  const std::vector<Example> train_ex = prepare(train, context, spec, tm.pca);
  const std::vector<Example> valid_ex = prepare(valid, context, spec, tm.pca);

  ParamBundle& params = live_params(tm);
  numerics::AdamConfig adam_cfg;
  adam_cfg.alpha = hyper.learning_rate;
  numerics::AdamState adam = numerics::AdamState::init(params, adam_cfg);
  ParamBundle grads = params.zeros_like();

  std::vector<std::size_t> order(train_ex.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  ParamBundle best = copy_bundle(params);
  double best_valid = std::numeric_limits<double>::infinity();
  int best_epoch = -1;

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    Rng epoch_rng(derive_seed(seed, 0x65706f6368 /* "epoch" */, static_cast<std::uint64_t>(epoch)));
    epoch_rng.shuffle(order);

    double train_loss_sum = 0.0;
    const std::size_t B = static_cast<std::size_t>(hyper.batch_size);
    for (std::size_t start = 0; start < order.size(); start += B) {
      const std::size_t end = std::min(order.size(), start + B);
      grads.set_zero();
      for (std::size_t i = start; i < end; ++i)
        train_loss_sum += example_loss_grad(tm, train_ex[order[i]], grads);
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t i = 0; i < grads.size(); ++i) grads.value(i) *= inv;
      numerics::adam_step(params, grads, adam);
    }
    const double train_loss = train_loss_sum / static_cast<double>(train_ex.size());
    if (!std::isfinite(train_loss))
      throw std::runtime_error("train_classifier: training diverged at epoch " +
                               std::to_string(epoch));

    double valid_loss = 0.0;
    for (const Example& ex : valid_ex) valid_loss += example_loss(tm, ex);
    valid_loss /= static_cast<double>(valid_ex.size());

    tm.meta.train_nats.push_back(train_loss);
    tm.meta.validation_nats.push_back(valid_loss);
    if (valid_loss < best_valid) {
      best_valid = valid_loss;
      best_epoch = epoch;
      best = copy_bundle(params);
    }
  }

  // Early-selection snapshot: keep the best-validation parameters.
  for (std::size_t i = 0; i < params.size(); ++i) params.value(i) = best.value(i);
  tm.meta.epochs_run = hyper.epochs;
  tm.meta.best_epoch = best_epoch;
  tm.meta.best_validation_nats = best_valid;
  tm.meta.final_validation_nats = tm.meta.validation_nats.back();
  return tm;
}

}  // namespace declmi::models
