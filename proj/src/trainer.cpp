#include "sslt/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "sslt/errors.hpp"
#include "sslt/sampling.hpp"

namespace sslt {

namespace {

// Stream tags for derive_seed; every phase draws from its own generator.
enum SeedTag : std::uint64_t {
  kTagModelInit = 11,
  kTagInitEmbed = 12,
  kTagHeadReinit = 13,
  kTagInitHead = 14,
  kTagStage2 = 15,
  kTagStage3 = 16,
  kTagBaseline = 17,
};

}  // namespace

std::vector<std::string> TrainConfig::problems() const {
  std::vector<std::string> p;
  auto at_least = [&](int v, int lo, const char* name) {
    if (v < lo) p.push_back(std::string(name) + " must be >= " + std::to_string(lo) + " (got " + std::to_string(v) + ")");
  };
  at_least(init_embed_epochs, 1, "init_embed_epochs");
  at_least(init_classifier_epochs, 1, "init_classifier_epochs");
  at_least(loops, 0, "loops");
  at_least(stage2_epochs, 1, "stage2_epochs");
  at_least(stage3_epochs, 1, "stage3_epochs");
  at_least(batch_size, 1, "batch_size");
  if (!(lr >= 0.0) || !std::isfinite(lr)) p.push_back("lr must be a finite value >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) p.push_back("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) p.push_back("weight_decay must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) p.push_back("lambda must be >= 0");
  if (hidden_widths.empty()) p.push_back("hidden_widths needs at least one layer");
  for (int w : hidden_widths)
    if (w < 1) p.push_back("hidden_widths entries must be >= 1");
  return p;
}

void TrainConfig::validate() const {
  auto p = problems();
  if (!p.empty()) throw ConfigError(std::move(p));
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::rc: return "R+C";
    case Variant::rr: return "R+R";
    case Variant::cr: return "C+R";
    case Variant::cc: return "C+C";
    case Variant::classifier_on_union: return "classifier_on_union";
    case Variant::no_unsup_embed: return "no_unsup_embed";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "R+C" || name == "default") return Variant::rc;
  if (name == "R+R") return Variant::rr;
  if (name == "C+R") return Variant::cr;
  if (name == "C+C") return Variant::cc;
  if (name == "classifier_on_union") return Variant::classifier_on_union;
  if (name == "no_unsup_embed") return Variant::no_unsup_embed;
  throw ConfigError("unknown variant '" + std::string(name) +
                    "' (expected R+C, R+R, C+R, C+C, classifier_on_union or no_unsup_embed)");
}

VariantPlan plan_for(Variant v) {
  switch (v) {
    case Variant::rc: return {false, true, true, false};
    case Variant::rr: return {false, true, false, false};
    case Variant::cr: return {true, true, false, false};
    case Variant::cc: return {true, true, true, false};
    case Variant::classifier_on_union: return {false, true, true, true};
    case Variant::no_unsup_embed: return {false, false, true, true};
  }
  return {};
}

namespace {

struct LossAccumulator {
  double ce = 0.0, consistency = 0.0, total = 0.0;
  double weight = 0.0;

  void add(const LossValue& v, int n) {
    ce += v.ce_part * n;
    consistency += v.consistency_part * n;
    total += v.total * n;
    weight += n;
  }
  EpochLoss mean() const {
    if (weight == 0.0) return {};
    return {ce / weight, consistency / weight, total / weight};
  }
};

int embedding_dim(const ModelState& m) { return m.embedding.output_dim(); }

void notify(const TrainHooks* hooks, Stage stage, int loop, const ModelState* before, const ModelState& after) {
  if (hooks && hooks->on_stage && before) hooks->on_stage(stage, loop, *before, after);
}

std::optional<ModelState> snapshot(const TrainHooks* hooks, const ModelState& m) {
  if (hooks && hooks->on_stage) return m;
  return std::nullopt;
}

void require_trainable(const LabeledSet& labeled) {
  SSLT_CHECK(labeled.size() > 0, DataError, "labeled set is empty");
  for (int j = 0; j < labeled.num_classes(); ++j)
    SSLT_CHECK(labeled.class_counts[static_cast<std::size_t>(j)] > 0, DataError,
               "class " + std::to_string(j) + " has no labeled samples");
}

}  // namespace

// ---- initialization -------------------------------------------------------------

ModelState init_decoupled(const LabeledSet& labeled, const TrainConfig& cfg, LoopTrace* trace,
                          const TrainHooks* hooks) {
  cfg.validate();
  require_trainable(labeled);
  const int n = labeled.size();
  const int c = labeled.num_classes();

  // Phase A: f and g' jointly, random sampling, cross-entropy.
  ModelState model = init_model({labeled.dim(), cfg.hidden_widths, c}, derive_seed(cfg.seed, kTagModelInit));
  auto before = snapshot(hooks, model);
  {
    OptimState opt = make_optimizer(cfg.lr, cfg.momentum, cfg.weight_decay, cfg.init_embed_epochs);
    const DataView view{&labeled};
    const LossSpec spec = LossSpec::cross_entropy(Head::random, true);
    for (int e = 0; e < cfg.init_embed_epochs; ++e) {
      opt.epoch = e;
      const BatchPlan plan = random_batches(n, cfg.batch_size, derive_seed(cfg.seed, kTagInitEmbed, e));
      LossAccumulator acc;
      for (const auto& refs : plan.batches) {
        const BackwardResult r = backward(assemble_batch(refs, view), model, spec);
        sgd_step(model, r.grads, opt);
        acc.add(r.loss, static_cast<int>(refs.size()));
      }
      if (trace) trace->init_embed.push_back(acc.mean());
    }
  }
  notify(hooks, Stage::init_embed, -1, before ? &*before : nullptr, model);

  // Phase B: a fresh g on the frozen embedding, class-balanced sampling.
  before = snapshot(hooks, model);
  {
    Rng rng(derive_seed(cfg.seed, kTagHeadReinit));
    model.head_balanced = init_classifier(embedding_dim(model), c, rng);
    const Matrix features = embed(model.embedding, labeled.features);
    const DataView view{&labeled, nullptr, nullptr, &features};
    const ClassIndex index = build_class_index(labeled.labels, c, Source::labeled);
    const int steps = balanced_steps_per_epoch(n, cfg.batch_size);
    OptimState opt = make_optimizer(cfg.lr, cfg.momentum, cfg.weight_decay, cfg.init_classifier_epochs);
    for (int e = 0; e < cfg.init_classifier_epochs; ++e) {
      opt.epoch = e;
      const BatchPlan plan = class_balanced_batches(index, cfg.batch_size, steps, derive_seed(cfg.seed, kTagInitHead, e));
      LossAccumulator acc;
      for (const auto& refs : plan.batches) {
        const BackwardResult r = sup_loss(refs, view, model);
        sgd_step(model, r.grads, opt);
        acc.add(r.loss, static_cast<int>(refs.size()));
      }
      if (trace) trace->init_classifier.push_back(acc.mean());
    }
  }
  notify(hooks, Stage::init_classifier, -1, before ? &*before : nullptr, model);
  if (trace) trace->embedding_epochs = cfg.init_embed_epochs;
  return model;
}

// ---- stages ---------------------------------------------------------------------

PseudoLabeledSet assign_pseudo_labels(const ModelState& model, const UnlabeledSet& unlabeled) {
  PseudoLabeledSet pseudo;
  pseudo.num_classes = model.num_classes();
  if (unlabeled.size() == 0) return pseudo;
  pseudo.labels = predict_labels(model, Head::balanced, unlabeled.features);
  pseudo.sample_ids.resize(pseudo.labels.size());
  for (std::size_t i = 0; i < pseudo.sample_ids.size(); ++i) pseudo.sample_ids[i] = static_cast<int>(i);
  return pseudo;
}

std::vector<EpochLoss> stage2_semi_finetune(ModelState& model, const LabeledSet& labeled,
                                            const UnlabeledSet& unlabeled, const PseudoLabeledSet& pseudo,
                                            const TrainConfig& cfg, const Stage2Options& opts,
                                            PredictionMemory& memory) {
  SSLT_CHECK(opts.epochs >= 1, ConfigError, "stage 2 needs at least one epoch");
  pseudo.validate(unlabeled.size());
  const int n = labeled.size();
  const int m = opts.use_pseudo ? pseudo.size() : 0;
  const DataView view{&labeled, &unlabeled, &pseudo};

  ClassIndex index;
  if (opts.balanced) {
    if (opts.use_pseudo) {
      index = build_union_class_index(labeled, pseudo);
    } else {
      index = build_class_index(labeled.labels, labeled.num_classes(), Source::labeled);
    }
  }
  const int steps = balanced_steps_per_epoch(n + m, cfg.batch_size);

  OptimState opt = make_optimizer(cfg.lr, cfg.momentum, cfg.weight_decay, opts.epochs);
  std::vector<EpochLoss> curve;
  curve.reserve(static_cast<std::size_t>(opts.epochs));
  for (int e = 0; e < opts.epochs; ++e) {
    opt.epoch = e;
    memory.begin_epoch(opts.memory_epoch_base + e);
    const auto epoch_seed = derive_seed(opts.seed, static_cast<std::uint64_t>(e));
    const BatchPlan plan = opts.balanced ? class_balanced_batches(index, cfg.batch_size, steps, epoch_seed)
                                         : mixed_union_batches(n, m, cfg.batch_size, epoch_seed);
    LossAccumulator acc;
    for (const auto& refs : plan.batches) {
      const BackwardResult r = semi_loss(refs, view, model, memory, cfg.lambda);
      sgd_step(model, r.grads, opt);
      acc.add(r.loss, static_cast<int>(refs.size()));
    }
    curve.push_back(acc.mean());
  }
  return curve;
}

std::vector<EpochLoss> stage3_sup_finetune(ModelState& model, const LabeledSet& labeled, const TrainConfig& cfg,
                                           const Stage3Options& opts, long long* pseudo_draws) {
  SSLT_CHECK(opts.epochs >= 1, ConfigError, "stage 3 needs at least one epoch");
  const bool with_pseudo = opts.pseudo != nullptr;
  SSLT_CHECK(!with_pseudo || opts.unlabeled != nullptr, ContractError, "pseudo labels given without unlabeled data");
  if (with_pseudo) opts.pseudo->validate(opts.unlabeled->size());

  // f is frozen for the whole stage, so embeddings are computed once.
  const Matrix labeled_features = embed(model.embedding, labeled.features);
  Matrix unlabeled_features;
  if (with_pseudo && opts.unlabeled->size() > 0) unlabeled_features = embed(model.embedding, opts.unlabeled->features);
  const DataView view{&labeled, opts.unlabeled, opts.pseudo, &labeled_features,
                      with_pseudo ? &unlabeled_features : nullptr};
  const SourcePolicy policy = with_pseudo ? SourcePolicy::allow_pseudo : SourcePolicy::labeled_only;

  const int n = labeled.size();
  const int m = with_pseudo ? opts.pseudo->size() : 0;
  ClassIndex index;
  if (opts.balanced) {
    index = with_pseudo ? build_union_class_index(labeled, *opts.pseudo)
                        : build_class_index(labeled.labels, labeled.num_classes(), Source::labeled);
  }
  const int steps = balanced_steps_per_epoch(n + m, cfg.batch_size);

  OptimState opt = make_optimizer(cfg.lr, cfg.momentum, cfg.weight_decay, opts.epochs);
  std::vector<EpochLoss> curve;
  for (int e = 0; e < opts.epochs; ++e) {
    opt.epoch = e;
    const auto epoch_seed = derive_seed(opts.seed, static_cast<std::uint64_t>(e));
    const BatchPlan plan = opts.balanced ? class_balanced_batches(index, cfg.batch_size, steps, epoch_seed)
                                         : mixed_union_batches(n, m, cfg.batch_size, epoch_seed);
    LossAccumulator acc;
    for (const auto& refs : plan.batches) {
      if (pseudo_draws)
        for (const auto& ref : refs) *pseudo_draws += ref.source == Source::pseudo ? 1 : 0;
      const BackwardResult r = sup_loss(refs, view, model, policy);
      sgd_step(model, r.grads, opt);
      acc.add(r.loss, static_cast<int>(refs.size()));
    }
    curve.push_back(acc.mean());
  }
  return curve;
}

// ---- full procedures --------------------------------------------------------------

namespace {

std::optional<MetricsReport> test_metrics(const ModelState& model, const EvalContext* eval, const TrainConfig& cfg,
                                          std::string label, int loop) {
  if (!eval || !eval->test) return std::nullopt;
  MetricsReport r = evaluate(model, Head::balanced, *eval->test, eval->splits);
  r.label = std::move(label);
  r.loop = loop;
  r.seed = cfg.seed;
  return r;
}

std::optional<MetricsReport> pseudo_metrics(const PseudoLabeledSet& pseudo, const EvalContext* eval,
                                            const TrainConfig& cfg, int loop) {
  if (!eval || !eval->unlabeled_truth) return std::nullopt;
  MetricsReport r = pseudo_accuracy(pseudo, eval->unlabeled_truth, eval->splits);
  r.label = "pseudo_loop" + std::to_string(loop);
  r.loop = loop;
  r.seed = cfg.seed;
  return r;
}

std::vector<int> histogram(const PseudoLabeledSet& pseudo) {
  std::vector<int> h(static_cast<std::size_t>(pseudo.num_classes), 0);
  for (int y : pseudo.labels) ++h[static_cast<std::size_t>(y)];
  return h;
}

}  // namespace

RunResult alternate_from(ModelState model, const LabeledSet& labeled, const UnlabeledSet& unlabeled,
                         const TrainConfig& cfg, const EvalContext* eval, Variant variant, const TrainHooks* hooks) {
  cfg.validate();
  require_trainable(labeled);
  model.validate();
  SSLT_CHECK(unlabeled.size() == 0 || unlabeled.dim() == labeled.dim(), ConfigError,
             "labeled and unlabeled feature dimensions differ");
  const VariantPlan plan = plan_for(variant);

  RunResult result;
  result.trace.embedding_epochs = cfg.init_embed_epochs;
  result.trace.init_test = test_metrics(model, eval, cfg, "init", -1);

  PredictionMemory memory(labeled.size(), unlabeled.size(), labeled.num_classes());
  int memory_epochs = 0;

  for (int loop = 0; loop < cfg.loops; ++loop) {
    LoopRecord record;
    record.loop = loop;

    // Stage 1
    const PseudoLabeledSet pseudo = assign_pseudo_labels(model, unlabeled);
    record.pseudo = pseudo_metrics(pseudo, eval, cfg, loop);
    record.pseudo_label_histogram = histogram(pseudo);

    // Stage 2
    if (cfg.reset_memory) {
      memory.clear();
      memory_epochs = 0;
    }
    auto before = snapshot(hooks, model);
    Stage2Options s2;
    s2.epochs = cfg.stage2_epochs;
    s2.seed = derive_seed(cfg.seed, kTagStage2, static_cast<std::uint64_t>(loop));
    s2.balanced = plan.stage2_balanced;
    s2.use_pseudo = plan.stage2_uses_pseudo;
    s2.memory_epoch_base = memory_epochs;
    record.stage2 = stage2_semi_finetune(model, labeled, unlabeled, pseudo, cfg, s2, memory);
    memory_epochs += cfg.stage2_epochs;
    result.trace.embedding_epochs += cfg.stage2_epochs;
    notify(hooks, Stage::semi_supervised, loop, before ? &*before : nullptr, model);

    // Stage 3
    before = snapshot(hooks, model);
    Stage3Options s3;
    s3.epochs = cfg.stage3_epochs;
    s3.seed = derive_seed(cfg.seed, kTagStage3, static_cast<std::uint64_t>(loop));
    s3.balanced = plan.stage3_balanced;
    if (plan.classifier_uses_pseudo) {
      s3.unlabeled = &unlabeled;
      s3.pseudo = &pseudo;
    }
    record.stage3 = stage3_sup_finetune(model, labeled, cfg, s3, &result.trace.pseudo_draws_in_balanced_head);
    notify(hooks, Stage::supervised, loop, before ? &*before : nullptr, model);

    record.test = test_metrics(model, eval, cfg, "loop" + std::to_string(loop), loop);
    if (hooks && hooks->on_loop) hooks->on_loop(model, record);
    result.trace.loops.push_back(std::move(record));
  }

  result.final_test = test_metrics(model, eval, cfg, std::string(to_string(variant)), cfg.loops);
  result.model = std::move(model);
  return result;
}

RunResult alternate_learn(const LabeledSet& labeled, const UnlabeledSet& unlabeled, const TrainConfig& cfg,
                          const EvalContext* eval, const TrainHooks* hooks) {
  LoopTrace init_trace;
  ModelState model = init_decoupled(labeled, cfg, &init_trace, hooks);
  RunResult r = alternate_from(std::move(model), labeled, unlabeled, cfg, eval, Variant::rc, hooks);
  r.trace.init_embed = std::move(init_trace.init_embed);
  r.trace.init_classifier = std::move(init_trace.init_classifier);
  return r;
}

RunResult baseline_from(ModelState model, const LabeledSet& labeled, const UnlabeledSet& unlabeled,
                        const TrainConfig& cfg, const EvalContext* eval, const TrainHooks* hooks) {
  cfg.validate();
  require_trainable(labeled);
  model.validate();

  RunResult result;
  result.trace.embedding_epochs = cfg.init_embed_epochs;
  result.trace.init_test = test_metrics(model, eval, cfg, "init", -1);
  if (cfg.loops == 0) {
    result.final_test = test_metrics(model, eval, cfg, "pseudo_label", 0);
    result.model = std::move(model);
    return result;
  }

  LoopRecord record;
  record.loop = 0;
  const PseudoLabeledSet pseudo = assign_pseudo_labels(model, unlabeled);
  record.pseudo = pseudo_metrics(pseudo, eval, cfg, 0);
  record.pseudo_label_histogram = histogram(pseudo);

  PredictionMemory memory(labeled.size(), unlabeled.size(), labeled.num_classes());
  auto before = snapshot(hooks, model);
  Stage2Options s2;
  s2.epochs = cfg.loops * cfg.stage2_epochs;
  s2.seed = derive_seed(cfg.seed, kTagBaseline, 2);
  record.stage2 = stage2_semi_finetune(model, labeled, unlabeled, pseudo, cfg, s2, memory);
  result.trace.embedding_epochs += s2.epochs;
  notify(hooks, Stage::semi_supervised, 0, before ? &*before : nullptr, model);

  before = snapshot(hooks, model);
  Stage3Options s3;
  s3.epochs = cfg.stage3_epochs;
  s3.seed = derive_seed(cfg.seed, kTagBaseline, 3);
  record.stage3 = stage3_sup_finetune(model, labeled, cfg, s3, &result.trace.pseudo_draws_in_balanced_head);
  notify(hooks, Stage::supervised, 0, before ? &*before : nullptr, model);

  record.test = test_metrics(model, eval, cfg, "loop0", 0);
  if (hooks && hooks->on_loop) hooks->on_loop(model, record);
  result.trace.loops.push_back(std::move(record));
  result.final_test = test_metrics(model, eval, cfg, "pseudo_label", 1);
  result.model = std::move(model);
  return result;
}

RunResult baseline_pseudo_label(const LabeledSet& labeled, const UnlabeledSet& unlabeled, const TrainConfig& cfg,
                                const EvalContext* eval, const TrainHooks* hooks) {
  LoopTrace init_trace;
  ModelState model = init_decoupled(labeled, cfg, &init_trace, hooks);
  RunResult r = baseline_from(std::move(model), labeled, unlabeled, cfg, eval, hooks);
  r.trace.init_embed = std::move(init_trace.init_embed);
  r.trace.init_classifier = std::move(init_trace.init_classifier);
  return r;
}

RunResult ablation_variant(const LabeledSet& labeled, const UnlabeledSet& unlabeled, const TrainConfig& cfg,
                           Variant variant, const EvalContext* eval, const TrainHooks* hooks) {
  LoopTrace init_trace;
  ModelState model = init_decoupled(labeled, cfg, &init_trace, hooks);
  RunResult r = alternate_from(std::move(model), labeled, unlabeled, cfg, eval, variant, hooks);
  r.trace.init_embed = std::move(init_trace.init_embed);
  r.trace.init_classifier = std::move(init_trace.init_classifier);
  return r;
}

}  // namespace sslt
