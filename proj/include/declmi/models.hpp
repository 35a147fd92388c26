#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "declmi/corpus.hpp"
#include "declmi/estimation.hpp"
#include "declmi/params.hpp"
#include "declmi/rng.hpp"

namespace declmi::models {

using corpus::Alphabet;
using corpus::Dataset;
using corpus::Lexeme;
using numerics::Matrix;
using numerics::ParamBundle;
using numerics::PCAModel;
using numerics::Vector;

// Which variables the classifier conditions on. PCA compression applies
// when a recurrent model also consumes the meaning vector.
struct ConditioningSpec {
  bool use_form = false;
  bool use_meaning = false;
  bool use_gender = false;
  int pca_k = 16;

  void validate() const;
  bool is_recurrent() const { return use_form; }
  std::string name() const;
};

struct TrainHyper {
  int epochs = 30;
  int hidden = 64;
  int layers = 1;
  double learning_rate = 1e-3;
  int batch_size = 64;
  int pca_k = 16;
  int grapheme_embed = 16;
  int gender_embed = 16;  // MLP gender path; recurrent models size it from hidden
};

struct TrainMeta {
  int epochs_run = 0;
  int best_epoch = -1;
  double best_validation_nats = 0.0;
  double final_validation_nats = 0.0;
  std::vector<double> train_nats;
  std::vector<double> validation_nats;
  std::uint64_t seed = 0;
};

// Feed-forward classifier over the meaning vector, optionally concatenated
// with a learned gender embedding. depth = number of hidden ReLU layers;
// depth 0 is plain multinomial logistic regression.
class MlpClassifier {
 public:
  static MlpClassifier init(int input_dim, int gender_count, int gender_dim, int hidden,
                            int depth, int n_classes, Rng& rng);

  Vector forward(const Vector& v, std::optional<int> gender) const;
  // Accumulates parameter gradients for one example; returns loss in nats.
  double loss_grad(const Vector& v, std::optional<int> gender, int target,
                   ParamBundle& grads) const;

  ParamBundle params;
  int input_dim = 0;
  int gender_dim = 0;  // 0 = no gender path
  int hidden = 0;
  int depth = 0;
  int n_classes = 0;
};

// Single-direction LSTM over grapheme ids. The initial hidden state of
// every layer carries the conditioning: the gender embedding alone, a
// learned projection of the (PCA-compressed) meaning vector alone, or the
// concatenation [meaning half | gender half]. Cell states start at zero.
class LstmClassifier {
 public:
  static LstmClassifier init(int alphabet_size, int embed_dim, int hidden, int layers,
                             int n_classes, int gender_count, bool use_gender,
                             int meaning_dim, Rng& rng);

  Vector forward(const std::vector<int>& grapheme_ids, std::optional<int> gender,
                 const std::optional<Vector>& meaning) const;
  double loss_grad(const std::vector<int>& grapheme_ids, std::optional<int> gender,
                   const std::optional<Vector>& meaning, int target, ParamBundle& grads) const;

  int meaning_half() const { return use_gender ? hidden / 2 : hidden; }
  int gender_part() const { return use_meaning() ? hidden - hidden / 2 : hidden; }
  bool use_meaning() const { return meaning_dim > 0; }

  ParamBundle params;
  int alphabet_size = 0;
  int embed_dim = 0;
  int hidden = 0;
  int layers = 0;
  int n_classes = 0;
  bool use_gender = false;
  int meaning_dim = 0;  // 0 = meaning not consumed

 private:
  Vector initial_hidden(std::optional<int> gender, const std::optional<Vector>& meaning) const;
  friend struct LstmBackward;
};

// An immutable trained classifier bundled with everything inference needs.
class TrainedModel {
 public:
  Vector predict(const Lexeme& lx) const;

  // The prediction closure used by the estimation layer. Captures `this`;
  // the model must outlive the returned function.
  estimation::Predictor predictor() const;

  // Checkpoints: <prefix>.params holds every array (model and PCA) in the
  // binary parameter container, <prefix>.json the structural sidecar.
  void save(const std::string& prefix) const;
  static TrainedModel load(const std::string& prefix);

  ConditioningSpec spec;
  std::variant<MlpClassifier, LstmClassifier> model;
  std::optional<PCAModel> pca;
  Alphabet alphabet;
  std::vector<std::string> class_names;
  std::vector<std::string> gender_names;
  TrainHyper hyper;
  TrainMeta meta;
};

// Mini-batch Adam on mean cross-entropy; validation tracked each epoch and
// the best-validation snapshot returned. Deterministic given the seed.
// `context` supplies the alphabet, registries and embedding dimension.
TrainedModel train_classifier(const std::vector<Lexeme>& train, const std::vector<Lexeme>& valid,
                              const Dataset& context, const ConditioningSpec& spec,
                              const TrainHyper& hyper, std::uint64_t seed);

}  // namespace declmi::models
