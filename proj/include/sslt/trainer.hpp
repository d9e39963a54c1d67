#pragma once

// Decoupled initialization and the alternate learning loop:
//
//   init:    f and g' trained jointly with random sampling on D, then a fresh
//            g trained alone with class-balanced sampling on frozen f.
//   loop i:  Stage 1  pseudo-label U with g o f
//            Stage 2  fine-tune f and g' on D u U-hat, random sampling, L_semi
//            Stage 3  fine-tune g on D, class-balanced sampling, f frozen
//
// plus the matched-budget Pseudo-Label baseline and the sampling/data-choice
// ablations.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sslt/datagen.hpp"
#include "sslt/evalreport.hpp"
#include "sslt/losses.hpp"
#include "sslt/netcore.hpp"

namespace sslt {

struct TrainConfig {
  int init_embed_epochs = 200;
  int init_classifier_epochs = 10;
  int loops = 5;
  int stage2_epochs = 40;
  int stage3_epochs = 10;
  int batch_size = 64;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double lambda = 1.0;
  std::uint64_t seed = 0;
  std::vector<int> hidden_widths{64, 64};
  bool reset_memory = true;  // clear the prediction memory at the start of every Stage 2

  /// Every violated constraint, empty when valid.
  std::vector<std::string> problems() const;
  void validate() const;
};

/// Table-style variants: {Stage-2 sampling}+{Stage-3 sampling}, and where the
/// classifier / embedding draw their data.
enum class Variant {
  rc,                   // default: random Stage 2, class-balanced Stage 3, g on D
  rr,                   // random Stage 2, random Stage 3
  cr,                   // class-balanced (on pseudo labels) Stage 2, random Stage 3
  cc,                   // class-balanced Stage 2 and Stage 3
  classifier_on_union,  // g trained on D u U-hat, embedding on D u U-hat
  no_unsup_embed,       // g trained on D u U-hat, embedding on D only
};

std::string_view to_string(Variant v);
/// Accepts "R+C"/"default", "R+R", "C+R", "C+C", "classifier_on_union",
/// "no_unsup_embed". Throws ConfigError for anything else.
Variant parse_variant(std::string_view name);

struct VariantPlan {
  bool stage2_balanced = false;
  bool stage2_uses_pseudo = true;
  bool stage3_balanced = true;
  bool classifier_uses_pseudo = false;
};
VariantPlan plan_for(Variant v);

struct EpochLoss {
  double ce = 0.0;
  double consistency = 0.0;
  double total = 0.0;
};

struct LoopRecord {
  int loop = 0;
  std::optional<MetricsReport> pseudo;  // pseudo-label accuracy at Stage 1
  std::optional<MetricsReport> test;    // g o f on the test set after Stage 3
  std::vector<int> pseudo_label_histogram;
  std::vector<EpochLoss> stage2;
  std::vector<EpochLoss> stage3;
};

struct LoopTrace {
  std::optional<MetricsReport> init_test;
  std::vector<EpochLoss> init_embed;
  std::vector<EpochLoss> init_classifier;
  std::vector<LoopRecord> loops;
  int embedding_epochs = 0;                     // init_embed_epochs + Stage-2 epochs actually run
  long long pseudo_draws_in_balanced_head = 0;  // pseudo-labeled samples that reached g's gradient
};

/// Optional evaluation data. Hidden labels are consumed only to report
/// pseudo-label accuracy; no training path reads them.
struct EvalContext {
  const LabeledSet* test = nullptr;
  const HiddenLabels* unlabeled_truth = nullptr;
  SplitSpec splits;
};

enum class Stage { init_embed, init_classifier, label_assignment, semi_supervised, supervised };

struct TrainHooks {
  /// After every loop (used for checkpoints and incremental traces).
  std::function<void(const ModelState&, const LoopRecord&)> on_loop;
  /// Around every training stage with the model before and after it.
  std::function<void(Stage, int loop, const ModelState& before, const ModelState& after)> on_stage;
};

struct RunResult {
  ModelState model;
  LoopTrace trace;
  std::optional<MetricsReport> final_test;
};

ModelState init_decoupled(const LabeledSet& labeled, const TrainConfig& cfg, LoopTrace* trace = nullptr,
                          const TrainHooks* hooks = nullptr);

/// y-hat_i = argmax g(f(x_i)), lowest index on ties, no thresholding.
PseudoLabeledSet assign_pseudo_labels(const ModelState& model, const UnlabeledSet& unlabeled);

struct Stage2Options {
  int epochs = 0;
  std::uint64_t seed = 0;
  bool balanced = false;    // class-balanced over D u U-hat (by pseudo labels)
  bool use_pseudo = true;   // false trains on D only
  int memory_epoch_base = 0;
};

/// Fine-tunes f and g' with L_semi; g is never touched. The cosine schedule
/// spans this call's epochs and momentum starts from zero.
std::vector<EpochLoss> stage2_semi_finetune(ModelState& model, const LabeledSet& labeled,
                                            const UnlabeledSet& unlabeled, const PseudoLabeledSet& pseudo,
                                            const TrainConfig& cfg, const Stage2Options& opts,
                                            PredictionMemory& memory);

struct Stage3Options {
  int epochs = 0;
  std::uint64_t seed = 0;
  bool balanced = true;
  /// Only for the classifier-on-union ablations: also train g on U-hat.
  const UnlabeledSet* unlabeled = nullptr;
  const PseudoLabeledSet* pseudo = nullptr;
};

/// Fine-tunes g alone on frozen embeddings computed once for the stage.
/// Returns the per-epoch loss; `pseudo_draws` (if given) accumulates how many
/// pseudo-labeled samples reached g's gradient.
std::vector<EpochLoss> stage3_sup_finetune(ModelState& model, const LabeledSet& labeled, const TrainConfig& cfg,
                                           const Stage3Options& opts, long long* pseudo_draws = nullptr);

/// N loops of Stages 1-3 from an already initialized model.
RunResult alternate_from(ModelState model, const LabeledSet& labeled, const UnlabeledSet& unlabeled,
                         const TrainConfig& cfg, const EvalContext* eval = nullptr, Variant variant = Variant::rc,
                         const TrainHooks* hooks = nullptr);

RunResult alternate_learn(const LabeledSet& labeled, const UnlabeledSet& unlabeled, const TrainConfig& cfg,
                          const EvalContext* eval = nullptr, const TrainHooks* hooks = nullptr);

/// Pseudo labels assigned once, then loops * stage2_epochs of Stage-2
/// fine-tuning and one Stage-3 pass.
RunResult baseline_from(ModelState model, const LabeledSet& labeled, const UnlabeledSet& unlabeled,
                        const TrainConfig& cfg, const EvalContext* eval = nullptr, const TrainHooks* hooks = nullptr);

RunResult baseline_pseudo_label(const LabeledSet& labeled, const UnlabeledSet& unlabeled, const TrainConfig& cfg,
                                const EvalContext* eval = nullptr, const TrainHooks* hooks = nullptr);

RunResult ablation_variant(const LabeledSet& labeled, const UnlabeledSet& unlabeled, const TrainConfig& cfg,
                           Variant variant, const EvalContext* eval = nullptr, const TrainHooks* hooks = nullptr);

}  // namespace sslt
