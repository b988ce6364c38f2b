// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fail. Each criterion carries its own time budget; timings print alongside.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <unistd.h>
#include <vector>

#include "oracles.hpp"
#include "toolken/arith.hpp"
#include "toolken/data.hpp"
#include "toolken/decoder.hpp"
#include "toolken/dump.hpp"
#include "toolken/eval.hpp"
#include "toolken/kb.hpp"
#include "toolken/lm.hpp"
#include "toolken/minihome.hpp"
#include "toolken/trainer.hpp"

using namespace toolken;
using Clock = std::chrono::steady_clock;

namespace {

std::string temp_path(const std::string& stem) {
    return (std::filesystem::temp_directory_path() /
            (stem + "." + std::to_string(::getpid())))
        .string();
}

struct Check {
    std::string name;
    double budget_seconds;
    std::function<bool(std::string&)> run;
};

// shared fixture helpers ----------------------------------------------------

void attach_demos(ToolkenVocab& vocab, const std::vector<AnnotatedTrace>& traces,
                  size_t per_tool) {
    for (auto& spec : vocab.mutable_tools()) {
        if (spec.kind != ToolKind::FunctionWithArgs) continue;
        size_t added = 0;
        for (const auto& t : traces) {
            if (added >= per_tool) break;
            if (t.calls.size() != 1 || t.calls[0].tool != spec.name) continue;
            const auto& c = t.calls[0];
            spec.demonstrations.push_back(
                {t.text.substr(0, c.start) + "[" + c.tool + "](" + c.raw_args + ")=" +
                 t.text.substr(c.start, c.end - c.start) + t.text.substr(c.end)});
            ++added;
        }
    }
}

LossBatch random_batch(Rng& rng, uint32_t d, uint32_t base, size_t tools, size_t positions) {
    LossBatch batch;
    batch.hidden_dim = d;
    batch.base_vocab = base;
    for (size_t p = 0; p < positions; ++p) {
        LossPosition pos;
        pos.hidden.resize(d);
        for (auto& v : pos.hidden) v = float(rng.gaussian());
        pos.word_logits.resize(base);
        for (auto& v : pos.word_logits) v = float(rng.gaussian());
        double u = rng.uniform01();
        if (u < 0.2) pos.fused_target = -1;
        else if (u < 0.6) pos.fused_target = rng.uniform_int(0, base - 1);
        else pos.fused_target = base + rng.uniform_int(0, int64_t(tools) - 1);
        batch.positions.push_back(std::move(pos));
    }
    return batch;
}

// C1 -------------------------------------------------------------------

bool gradient_correctness(std::string& detail) {
    Rng rng(1001);
    double worst = 0.0;
    for (int instance = 0; instance < 50; ++instance) {
        uint32_t d = uint32_t(rng.uniform_int(2, 16));
        size_t tools = size_t(rng.uniform_int(1, 5));
        uint32_t base = uint32_t(rng.uniform_int(4, 50));
        LossBatch batch = random_batch(rng, d, base, tools, size_t(rng.uniform_int(3, 10)));
        std::vector<double> w(tools * d);
        for (auto& v : w) v = rng.gaussian() * 0.7;
        LossGrad lg = loss_and_grad(batch, w, tools);
        auto fd = oracles::finite_difference_grad(batch, w, tools, 1e-4);
        for (size_t i = 0; i < w.size(); ++i) {
            double denom = std::max(1e-6, std::abs(fd[i]));
            worst = std::max(worst, std::abs(lg.grad[i] - fd[i]) / denom);
        }
    }
    char buf[80];
    std::snprintf(buf, sizeof(buf), "max relative error %.3e", worst);
    detail = buf;
    return worst < 1e-4;
}

// C2 -------------------------------------------------------------------

bool masking_exactness(std::string& detail) {
    Rng rng(1002);
    for (int trial = 0; trial < 20; ++trial) {
        LossBatch batch = random_batch(rng, 12, 20, 4, 40);
        std::vector<double> w(4 * 12);
        for (auto& v : w) v = rng.gaussian();
        LossGrad before = loss_and_grad(batch, w, 4);
        for (auto& pos : batch.positions) {
            if (pos.fused_target != -1) continue;
            for (auto& v : pos.hidden) v = float(rng.gaussian() * 1e3);
            for (auto& v : pos.word_logits) v = float(rng.gaussian() * 1e3);
        }
        LossGrad after = loss_and_grad(batch, w, 4);
        if (before.loss != after.loss || before.grad != after.grad) {
            detail = "sentinel positions leaked into loss or gradient";
            return false;
        }
    }
    detail = "bitwise identical across 20 randomizations";
    return true;
}

// C3 -------------------------------------------------------------------

bool expansion_invariance(std::string& detail) {
    Rng rng(1003);
    for (int trial = 0; trial < 100; ++trial) {
        const uint32_t d = uint32_t(rng.uniform_int(2, 32));
        const uint32_t base = uint32_t(rng.uniform_int(3, 40));
        const size_t tools = size_t(rng.uniform_int(1, 6));
        ToolkenEmbeddings emb;
        emb.hidden_dim = d;
        for (size_t j = 0; j < tools; ++j) {
            emb.tool_names.push_back("t" + std::to_string(j));
            for (uint32_t k = 0; k < d; ++k) emb.matrix.push_back(float(rng.gaussian()));
        }
        std::vector<float> h(d), wl(base);
        for (auto& v : h) v = float(rng.gaussian());
        for (auto& v : wl) v = float(rng.gaussian());
        auto before = fused_logits(h, wl, emb);

        ToolkenEmbeddings grown = emb;
        grown.tool_names.push_back("new_tool");
        for (uint32_t k = 0; k < d; ++k) grown.matrix.push_back(float(rng.gaussian()));
        auto after = fused_logits(h, wl, grown);

        for (size_t i = 0; i < before.size(); ++i)
            if (before[i] != after[i]) {
                detail = "pre-existing fused logit changed on expansion";
                return false;
            }
        size_t argmax_before = 0, argmax_after = 0;
        for (size_t i = 1; i < before.size(); ++i)
            if (before[i] > before[argmax_before]) argmax_before = i;
        for (size_t i = 1; i < before.size(); ++i)
            if (after[i] > after[argmax_after]) argmax_after = i;
        if (argmax_before != argmax_after) {
            detail = "restricted argmax changed on expansion";
            return false;
        }
    }
    detail = "100 random (h, W) pairs bit-identical";
    return true;
}

// C4 -------------------------------------------------------------------

bool frozen_backbone(std::string& detail) {
    ToyLM lm;
    const Fingerprint fp_before = lm.compute_fingerprint();
    ToolRegistry registry{ToolkenVocab(lm.vocab_size())};
    register_arithmetic(registry, basic_four());
    auto& vocab = registry.vocab();
    std::vector<AnnotatedTrace> traces;
    for (const auto& op : basic_four()) {
        auto t = synth_onehop(op, builtin_arith_templates(), 12, 77);
        traces.insert(traces.end(), t.begin(), t.end());
    }
    std::vector<ParallelSequence> seqs;
    for (const auto& t : traces) seqs.push_back(build_parallel(t, lm, vocab));
    const std::string dump_path = temp_path("accept_frozen.tkhd");
    harvest_to(lm, vocab, seqs, dump_path);
    const Fingerprint dump_before = file_sha256(dump_path);

    Dump dump = read_dump(dump_path);
    TrainConfig cfg;
    cfg.epochs = 12;
    cfg.learning_rate = 0.2;
    cfg.class_balance = true;
    cfg.word_sample_rate = 0.2;
    fit(dump, vocab, lm, cfg);

    const Fingerprint dump_after = file_sha256(dump_path);
    const Fingerprint fp_after = lm.compute_fingerprint();
    std::filesystem::remove(dump_path);
    if (dump_before != dump_after) {
        detail = "dump bytes changed during training";
        return false;
    }
    if (fp_before != fp_after) {
        detail = "backbone parameters changed during training";
        return false;
    }
    detail = "dump bytes and backbone fingerprint unchanged";
    return true;
}

// C5 -------------------------------------------------------------------

class LinearHead final : public LMBackend {
public:
    LinearHead(uint32_t vocab, uint32_t dim, uint64_t seed) : v_(vocab), d_(dim) {
        Rng rng(seed);
        w_.resize(size_t(v_) * d_);
        for (auto& x : w_) x = float(rng.gaussian() * 0.05);
        Sha256 h;
        h.update("LINHEAD", 7);
        h.update_f32(w_.data(), w_.size());
        fp_ = h.digest();
    }
    uint32_t vocab_size() const override { return v_; }
    uint32_t hidden_dim() const override { return d_; }
    uint32_t eos_id() const override { return 0; }
    Fingerprint fingerprint() const override { return fp_; }
    std::vector<uint32_t> tokenize(std::string_view text) const override {
        std::vector<uint32_t> ids;
        for (char c : text) ids.push_back(uint32_t(uint8_t(c)) % v_);
        return ids;
    }
    std::string detokenize(std::span<const uint32_t>) const override { return {}; }
    std::unique_ptr<LMSession> start_session() const override {
        throw InternalError("LinearHead has no sessions");
    }
    WordLogits head_logits(const HiddenState& h) const override {
        WordLogits out(v_);
        for (uint32_t i = 0; i < v_; ++i) {
            double acc = 0;
            for (uint32_t k = 0; k < d_; ++k) acc += double(w_[size_t(i) * d_ + k]) * h[k];
            out[i] = float(acc);
        }
        return out;
    }

private:
    uint32_t v_, d_;
    std::vector<float> w_;
    Fingerprint fp_{};
};

bool separable_fit(std::string& detail) {
    constexpr uint32_t kDim = 32;
    constexpr size_t kExamples = 300;
    LinearHead head(16, kDim, 5);
    Rng rng(1005);
    std::vector<std::vector<double>> centers(3, std::vector<double>(kDim));
    for (auto& c : centers)
        for (auto& v : c) v = rng.gaussian() * 3.0;

    Dump dump;
    dump.header.hidden_dim = kDim;
    dump.header.base_vocab_size = head.vocab_size();
    dump.header.fingerprint = head.fingerprint();
    dump.header.tool_names = {"t0", "t1", "t2"};
    std::vector<std::vector<float>> xs;
    std::vector<size_t> ys;
    for (size_t i = 0; i < kExamples; ++i) {
        size_t cls = i % 3;
        DumpRecord rec;
        rec.targets = {uint32_t(head.vocab_size() + cls)};
        rec.hidden.resize(kDim);
        for (uint32_t k = 0; k < kDim; ++k)
            rec.hidden[k] = float(centers[cls][k] + rng.gaussian() * 0.6);
        xs.push_back({rec.hidden.begin(), rec.hidden.end()});
        ys.push_back(cls);
        dump.records.push_back(std::move(rec));
    }

    ToolkenVocab vocab(head.vocab_size());
    for (const auto& name : {"t0", "t1", "t2"}) {
        ToolSpec spec;
        spec.name = name;
        spec.kind = ToolKind::FunctionWithArgs;
        spec.arg_schema = {{"a", ArgKind::Number}};
        vocab.register_tool(spec);
    }
    TrainConfig cfg;
    cfg.epochs = 50;
    cfg.learning_rate = 0.1;
    cfg.val_fraction = 0.2;
    cfg.patience = 1000;
    FitResult result = fit(dump, vocab, head, cfg);
    const double fit_acc = result.report.epochs[result.report.selected_epoch].val_accuracy;

    // independent oracle on the same 20% split (fit holds out the first 20%
    // of its seeded shuffle; the oracle uses a train/test split of its own)
    oracles::Centroids centroids = oracles::Centroids::fit(
        {xs.begin() + 60, xs.end()}, {ys.begin() + 60, ys.end()}, 3);
    size_t oracle_hits = 0;
    for (size_t i = 0; i < 60; ++i)
        oracle_hits += centroids.classify(xs[i]) == ys[i];
    const double oracle_acc = double(oracle_hits) / 60.0;

    char buf[96];
    std::snprintf(buf, sizeof(buf), "fit %.4f, nearest-centroid oracle %.4f within %zu epochs",
                  fit_acc, oracle_acc, result.report.epochs.size());
    detail = buf;
    return fit_acc >= 0.99 && oracle_acc >= 0.99 && result.report.epochs.size() <= 50;
}

// C6 -------------------------------------------------------------------

bool funcqa_desk_run(std::string& detail) {
    ToyLM lm;
    ToolRegistry registry{ToolkenVocab(lm.vocab_size())};
    register_arithmetic(registry);
    auto& vocab = registry.vocab();

    std::vector<AnnotatedTrace> train, val;
    for (const auto& op : arithmetic_ops()) {
        auto traces = synth_onehop(op.name, builtin_arith_templates(), 50, 99);
        for (size_t i = 0; i < traces.size(); ++i)
            (i < 47 ? train : val).push_back(traces[i]);
    }
    if (train.size() != 611 || val.size() != 39) {
        detail = "corpus counts off";
        return false;
    }
    attach_demos(vocab, train, 4);

    std::vector<ParallelSequence> seqs;
    for (const auto& t : train) seqs.push_back(build_parallel(t, lm, vocab));
    const std::string dump_path = temp_path("accept_funcqa.tkhd");
    harvest_to(lm, vocab, seqs, dump_path);
    Dump dump = read_dump(dump_path);
    std::filesystem::remove(dump_path);

    TrainConfig cfg;
    cfg.epochs = 300;
    cfg.learning_rate = 0.2;
    cfg.seed = 5;
    cfg.patience = 1000000;
    cfg.class_balance = true;
    cfg.word_sample_rate = 0.15;
    FitResult fitres = fit(dump, vocab, lm, cfg);

    DecodeConfig dc;
    dc.max_new_tokens = 24;
    dc.max_tool_calls = 4;
    DecodeSession session(lm, registry, fitres.embeddings, dc);
    size_t tool_ok = 0, answer_ok = 0, injection_ok = 0, via_tool = 0;
    for (const auto& t : val) {
        const auto& c = t.calls[0];
        Transcript tr = session.generate(t.text.substr(0, c.start));
        double gold = *parse_number(t.text.substr(c.start, c.end - c.start));
        EvalRecord rec = score_numeric_transcript(tr, gold, c.tool, NumericMode::Exact2dp);
        tool_ok += rec.first_tool_correct;
        answer_ok += rec.correct;
        injection_ok += injection_sound(tr, registry);
        via_tool += rec.calls_ok > 0;
    }
    const double tool_acc = double(tool_ok) / double(val.size());
    const double answer_acc = double(answer_ok) / double(val.size());
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "tool selection %.4f, exact-match %.4f, injection-sound %zu/39, via-tool "
                  "%zu/39",
                  tool_acc, answer_acc, injection_ok, via_tool);
    detail = buf;
    return tool_acc >= 0.95 && answer_acc >= 0.90 && injection_ok == val.size() &&
           via_tool == val.size();
}

// C7 -------------------------------------------------------------------

bool kb_desk_run(std::string& detail) {
    ToyLM lm;
    SyntheticKb kb = synth_kb(234, 20, 20, 1234);
    if (kb.store.relation_count() < 234 || kb.store.fact_count(kb.train[0].relation) < 20) {
        detail = "fixture too small";
        return false;
    }
    ToolRegistry registry{ToolkenVocab(lm.vocab_size())};
    register_kb_relations(registry, kb.store);
    auto& vocab = registry.vocab();
    std::vector<AnnotatedTrace> demo_source;
    for (const auto& f : kb.train) demo_source.push_back(kb_to_qa(f, kb.store));
    attach_demos(vocab, demo_source, 4);

    std::vector<ParallelSequence> seqs;
    for (const auto& t : demo_source) seqs.push_back(build_parallel(t, lm, vocab));
    const std::string dump_path = temp_path("accept_kb.tkhd");
    harvest_to(lm, vocab, seqs, dump_path);
    Dump dump = read_dump(dump_path);
    std::filesystem::remove(dump_path);

    TrainConfig cfg;
    cfg.epochs = 120;
    cfg.learning_rate = 0.2;
    cfg.seed = 5;
    cfg.patience = 1000000;
    cfg.class_balance = true;
    cfg.word_sample_rate = 0.05;
    FitResult fitres = fit(dump, vocab, lm, cfg);

    auto subsets = sample_kb_subsets(kb.eval, {30, 60, 100, 234}, 500, 77);
    double acc30 = 0, acc234 = 0;
    size_t answered_total = 0, honest_total = 0;
    const std::vector<size_t> sizes = {30, 60, 100, 234};
    std::string per_subset;
    for (size_t s = 0; s < subsets.size(); ++s) {
        DecodeConfig dc;
        dc.max_new_tokens = 40;
        dc.max_tool_calls = 4;
        dc.tool_allowlist.insert(subsets[s].relations.begin(), subsets[s].relations.end());
        DecodeSession session(lm, registry, fitres.embeddings, dc);
        size_t tool_ok = 0;
        for (const auto& f : subsets[s].questions) {
            AnnotatedTrace t = kb_to_qa(f, kb.store);
            const auto& c = t.calls[0];
            Transcript tr = session.generate(t.text.substr(0, c.start));
            EvalRecord rec = score_kb_transcript(tr, f.object, f.relation);
            tool_ok += rec.first_tool_correct;
            if (rec.answered) {
                ++answered_total;
                bool stored = false;
                for (const auto* tc : tr.calls())
                    if (tc->call.status == CallStatus::Ok &&
                        kb.store.is_stored_object(tc->call.tool, rec.predicted))
                        stored = true;
                honest_total += stored;
            }
        }
        const double acc = double(tool_ok) / double(subsets[s].questions.size());
        if (sizes[s] == 30) acc30 = acc;
        if (sizes[s] == 234) acc234 = acc;
        per_subset += std::to_string(sizes[s]) + ":" +
                      std::to_string(acc).substr(0, 5) + " ";
    }
    char buf[160];
    std::snprintf(buf, sizeof(buf), "relation selection %shonest %zu/%zu answered",
                  per_subset.c_str(), honest_total, answered_total);
    detail = buf;
    return acc30 >= 0.90 && acc234 >= 0.75 && honest_total == answered_total &&
           answered_total > 0;
}

// C8 -------------------------------------------------------------------

bool arithmetic_exactness(std::string& detail) {
    Rng rng(1008);
    size_t checked = 0;
    for (const auto& op : arithmetic_ops()) {
        for (int i = 0; i < 1000; ++i) {
            std::vector<double> args;
            bool integer_op = false;
            if (op.name == "choose") {
                int64_t n = rng.uniform_int(0, 20);
                args = {double(n), double(rng.uniform_int(0, n))};
                integer_op = true;
            } else if (op.name == "permutate") {
                int64_t n = rng.uniform_int(0, 15);
                args = {double(n), double(rng.uniform_int(0, std::min<int64_t>(n, 10)))};
                integer_op = true;
            } else if (op.name == "gcd" || op.name == "lcm") {
                args = {double(rng.uniform_int(0, 200)), double(rng.uniform_int(1, 200))};
                integer_op = true;
            } else if (op.name == "remainder") {
                args = {rng.uniform(1, 500), rng.uniform(1, 30)};
            } else if (op.name == "sqrt" || op.name == "log" || op.name == "ln") {
                args = {rng.uniform(0.25, 2000)};
            } else if (op.name == "power") {
                args = {rng.uniform(0.5, 12), rng.uniform(-2, 6)};
            } else {
                args = {rng.uniform(0.5, 900), rng.uniform(0.5, 900)};
            }
            double got = exec_arith(op.name, args);
            if (integer_op) {
                double want = 0;
                if (op.name == "choose")
                    want = oracles::choose_oracle(int64_t(args[0]), int64_t(args[1]));
                else if (op.name == "permutate")
                    want = oracles::permutate_oracle(int64_t(args[0]), int64_t(args[1]));
                else if (op.name == "gcd")
                    want = double(oracles::gcd_oracle(int64_t(args[0]), int64_t(args[1])));
                else
                    want = double(oracles::lcm_oracle(int64_t(args[0]), int64_t(args[1])));
                if (got != want) {
                    detail = op.name + " diverged from the exact oracle";
                    return false;
                }
            } else {
                long double want = oracles::float_op_oracle(op.name, args);
                double tol = 1e-12 * std::max(1.0, std::abs(double(want)));
                if (std::abs(got - double(want)) > tol) {
                    detail = op.name + " beyond 1e-12 of the reference";
                    return false;
                }
            }
            ++checked;
        }
    }
    detail = std::to_string(checked) + " samples across 13 operators";
    return checked == 13000;
}

// C9 -------------------------------------------------------------------

bool plan_mode_guarantees(std::string& detail) {
    ToyLM lm;
    ToolRegistry registry{ToolkenVocab(lm.vocab_size())};
    register_plan_toolkens(registry.vocab());
    auto& vocab = registry.vocab();

    auto train = demo_corpus(200, 11);
    // held-out scenarios; the SIT check uses the seat-bearing families
    auto held = demo_corpus(120, 9999);

    std::vector<ParallelSequence> seqs;
    for (const auto& s : train) seqs.push_back(build_plan_sequence(s, lm, vocab));
    const std::string dump_path = temp_path("accept_plan.tkhd");
    harvest_to(lm, vocab, seqs, dump_path);
    Dump dump = read_dump(dump_path);
    std::filesystem::remove(dump_path);

    TrainConfig cfg;
    cfg.epochs = 200;
    cfg.learning_rate = 0.2;
    cfg.seed = 5;
    cfg.patience = 1000000;
    cfg.class_balance = true;
    cfg.word_sample_rate = 0.1;
    FitResult fitres = fit(dump, vocab, lm, cfg);

    DecodeConfig dc;
    dc.max_new_tokens = 16;
    DecodeSession session(lm, registry, fitres.embeddings, dc);

    std::set<std::string> sittable;
    for (const auto& o : default_objects())
        if (o.properties.count("sittable")) sittable.insert(o.name);

    size_t plans = 0, grounded = 0, sit_steps = 0, sit_sittable = 0;
    size_t scenarios_with_sit = 0, scenarios_sit_ok = 0;
    size_t read_book = 0, read_book_finds_novel = 0;
    for (const auto& s : held) {
        if (plans >= 50 && scenarios_with_sit >= 20) break;
        PlanSequence plan = session.generate_plan(plan_prompt(s));
        auto steps = session.plan_steps(plan);
        PlanOutcome oc = run_plan(s, steps, vocab);
        if (plans < 50) {
            ++plans;
            grounded += oc.grounded;
        }
        bool has_sit = false, all_sittable = true;
        for (const auto& [a, o] : steps) {
            if (a != "SIT") continue;
            has_sit = true;
            ++sit_steps;
            if (sittable.count(o)) ++sit_sittable;
            else all_sittable = false;
        }
        if (has_sit) {
            ++scenarios_with_sit;
            scenarios_sit_ok += all_sittable;
        }
        if (s.goal == "Read book") {
            ++read_book;
            for (const auto& [a, o] : steps)
                if (a == "FIND" && o == "novel") {
                    ++read_book_finds_novel;
                    break;
                }
        }
    }
    const double sit_rate =
        scenarios_with_sit ? double(scenarios_sit_ok) / double(scenarios_with_sit) : 0.0;
    char buf[192];
    std::snprintf(buf, sizeof(buf),
                  "grounding %zu/%zu, SIT scenarios %zu, sittable choice %.4f "
                  "(%zu/%zu steps), read-book finds novel %zu/%zu",
                  grounded, plans, scenarios_with_sit, sit_rate, sit_sittable, sit_steps,
                  read_book_finds_novel, read_book);
    detail = buf;
    return plans == 50 && grounded == plans && scenarios_with_sit >= 10 && sit_rate >= 0.95 &&
           read_book > 0 && read_book_finds_novel > 0;
}

// C10 ------------------------------------------------------------------

bool scoring_rules(std::string& detail) {
    struct Case {
        double pred, gold;
        NumericMode mode;
        bool want;
    };
    const std::vector<Case> table = {
        {159.999, 160.0, NumericMode::Exact2dp, true},
        {160.004, 160.0, NumericMode::Exact2dp, true},
        {160.005, 160.0, NumericMode::Exact2dp, false},
        {159.996, 160.0, NumericMode::Exact2dp, true},
        {159.99, 160.0, NumericMode::Exact2dp, false},
        // 2.375 is exactly representable: a clean half-away-from-zero case
        {-2.375, -2.38, NumericMode::Exact2dp, true},
        {-2.374, -2.38, NumericMode::Exact2dp, false},
        {0.005, 0.01, NumericMode::Exact2dp, true},
        {-0.005, -0.01, NumericMode::Exact2dp, true},
        {2.375, 2.38, NumericMode::Exact2dp, true},
        {1234.561, 1234.56, NumericMode::Exact2dp, true},
        {1234.567, 1234.56, NumericMode::Exact2dp, false},
        {160.161, 160.0, NumericMode::Tolerance, false},  // just past 0.1% of 160
        {160.15, 160.0, NumericMode::Tolerance, true},
        {160.2, 160.0, NumericMode::Tolerance, false},
        {159.85, 160.0, NumericMode::Tolerance, true},
        {159.8, 160.0, NumericMode::Tolerance, false},
        {-99.91, -100.0, NumericMode::Tolerance, true},
        {-99.89, -100.0, NumericMode::Tolerance, false},
        {0.0, 0.0, NumericMode::Tolerance, true},
    };
    size_t idx = 0;
    for (const auto& c : table) {
        if (score_numeric(c.pred, c.gold, c.mode) != c.want) {
            detail = "case " + std::to_string(idx) + " disagreed";
            return false;
        }
        ++idx;
    }

    // fuzzed plan outcomes keep the metric orderings
    ToolkenVocab vocab(470);
    register_plan_toolkens(vocab);
    auto corpus = demo_corpus(40, 2026);
    Rng rng(1010);
    std::vector<std::string> actions;
    for (const auto& [a, _] : default_rule_table()) actions.push_back(a);
    std::vector<PlanOutcome> outcomes;
    for (const auto& s : corpus) {
        std::vector<std::pair<std::string, std::string>> steps;
        size_t len = size_t(rng.uniform_int(0, 7));
        for (size_t i = 0; i < len; ++i)
            steps.emplace_back(
                actions[size_t(rng.uniform_int(0, int64_t(actions.size()) - 1))],
                s.objects[size_t(rng.uniform_int(0, int64_t(s.objects.size()) - 1))].name);
        PlanOutcome oc = run_plan(s, steps, vocab);
        if (oc.success && !oc.success_relaxed) {
            detail = "success without success_relaxed";
            return false;
        }
        if (oc.success && !oc.executable) {
            detail = "success without executability";
            return false;
        }
        outcomes.push_back(oc);
    }
    PlanRates rates = score_plans(outcomes);
    if (rates.success > rates.success_relaxed || rates.success > rates.executable) {
        detail = "aggregate rates broke the ordering";
        return false;
    }
    detail = "20 numeric cases and 40 fuzzed plans agree";
    return true;
}

// C11 ------------------------------------------------------------------

bool round_trips(std::string& detail) {
    // checkpoint bit-identity
    Rng rng(1011);
    ToolkenEmbeddings emb;
    emb.hidden_dim = 64;
    for (int j = 0; j < 13; ++j) {
        emb.tool_names.push_back("op" + std::to_string(j));
        for (int k = 0; k < 64; ++k) emb.matrix.push_back(float(rng.gaussian()));
    }
    for (size_t i = 0; i < emb.lm_fingerprint.size(); ++i)
        emb.lm_fingerprint[i] = uint8_t(rng.uniform_int(0, 255));
    const std::string ckpt = temp_path("accept_ckpt.tken");
    save_checkpoint(emb, ckpt);
    ToolkenEmbeddings back = load_checkpoint(ckpt);
    const bool ckpt_ok = back.matrix == emb.matrix && back.tool_names == emb.tool_names &&
                         back.lm_fingerprint == emb.lm_fingerprint;
    save_checkpoint(back, ckpt + ".2");
    const bool bytes_ok = read_file(ckpt) == read_file(ckpt + ".2");
    std::filesystem::remove(ckpt);
    std::filesystem::remove(ckpt + ".2");

    // harvest -> read-back word-target cross-entropy consistency
    ToyLM lm;
    ToolkenVocab vocab(lm.vocab_size());
    ToolSpec spec;
    spec.name = "square";
    spec.kind = ToolKind::FunctionWithArgs;
    spec.arg_schema = {{"a", ArgKind::Number}};
    vocab.register_tool(spec);
    AnnotatedTrace trace;
    trace.text = "Question: What is 4 squared?\nAnswer: The answer is 16.";
    uint32_t start = uint32_t(trace.text.rfind("16"));
    trace.calls = {{start, start + 2, "square", "4"}};
    std::vector<ParallelSequence> seqs = {build_parallel(trace, lm, vocab)};
    const std::string dump_path = temp_path("accept_rt.tkhd");
    harvest_to(lm, vocab, seqs, dump_path);
    Dump dump = read_dump(dump_path);
    std::filesystem::remove(dump_path);

    auto live = lm.forward(seqs[0].tokens);
    double max_diff = 0.0;
    const auto& rec = dump.records[0];
    for (size_t k = 0; k < rec.targets.size(); ++k) {
        if (rec.targets[k] == kIgnoredTarget || rec.targets[k] >= lm.vocab_size()) continue;
        HiddenState h(rec.hidden.begin() + k * lm.hidden_dim(),
                      rec.hidden.begin() + (k + 1) * lm.hidden_dim());
        WordLogits from_dump = lm.head_logits(h);
        const WordLogits& from_live = live[k].word_logits;
        auto ce = [&](const WordLogits& wl) {
            double zmax = -HUGE_VAL;
            for (float v : wl) zmax = std::max(zmax, double(v));
            double sum = 0;
            for (float v : wl) sum += std::exp(double(v) - zmax);
            return (zmax + std::log(sum)) - double(wl[rec.targets[k]]);
        };
        max_diff = std::max(max_diff, std::abs(ce(from_dump) - ce(from_live)));
    }
    char buf[96];
    std::snprintf(buf, sizeof(buf), "checkpoint %s, max CE drift %.3e",
                  ckpt_ok && bytes_ok ? "bit-identical" : "MISMATCH", max_diff);
    detail = buf;
    return ckpt_ok && bytes_ok && max_diff < 1e-9;
}

}  // namespace

int main() {
    std::vector<Check> checks = {
        {"C1 gradient-correctness", 5.0, gradient_correctness},
        {"C2 masking-exactness", 1.0, masking_exactness},
        {"C3 expansion-invariance", 1.0, expansion_invariance},
        {"C4 frozen-backbone", 10.0, frozen_backbone},
        {"C5 separable-fit", 10.0, separable_fit},
        {"C6 funcqa-desk-run", 120.0, funcqa_desk_run},
        {"C7 kb-desk-run", 300.0, kb_desk_run},
        {"C8 arithmetic-exactness", 5.0, arithmetic_exactness},
        {"C9 plan-mode-guarantees", 120.0, plan_mode_guarantees},
        {"C10 scoring-rules", 1.0, scoring_rules},
        {"C11 round-trips", 5.0, round_trips},
    };

    int failures = 0;
    for (auto& check : checks) {
        std::string detail;
        const auto t0 = Clock::now();
        bool ok = false;
        try {
            ok = check.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double seconds =
            std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - t0).count() /
            1000.0;
        if (seconds > check.budget_seconds) {
            ok = false;
            detail += " [over budget " + std::to_string(check.budget_seconds) + "s]";
        }
        std::printf("[%s] %-26s %6.2fs  %s\n", ok ? "PASS" : "FAIL", check.name.c_str(),
                    seconds, detail.c_str());
        failures += !ok;
    }
    if (failures) std::printf("%d criterion(s) failed\n", failures);
    else std::printf("all %zu criteria passed\n", checks.size());
    return failures == 0 ? 0 : 1;
}
