#pragma once

// Training-data construction: paired (s, s') sequences from annotated traces,
// synthetic one-hop arithmetic demonstrations, KB fact-to-question conversion,
// KB evaluation subsets, and plan-mode sequences.
//
// File formats (all offsets are UTF-8 byte offsets):
//   traces    JSONL  {"text": ..., "calls": [{"start","end","tool","args"}]}
//   templates JSONL  {"tool": ..., "pattern": ...}
//   KB facts  TSV    relation<TAB>subject<TAB>object

#include <string>
#include <vector>

#include "json.hpp"
#include "toolken/arith.hpp"
#include "toolken/common.hpp"
#include "toolken/core.hpp"
#include "toolken/kb.hpp"
#include "toolken/lm.hpp"
#include "toolken/minihome.hpp"

namespace toolken {

struct CallAnnotation {
    uint32_t start = 0;  // [start, end) spans the *result substring*
    uint32_t end = 0;
    std::string tool;
    std::string raw_args;
};

struct AnnotatedTrace {
    std::string text;
    std::vector<CallAnnotation> calls;  // non-overlapping, sorted
};

inline void validate_trace(const AnnotatedTrace& trace) {
    uint32_t prev_end = 0;
    bool first = true;
    for (const auto& c : trace.calls) {
        if (c.start >= c.end) throw DataError("trace call span is empty");
        if (c.end > trace.text.size()) throw DataError("trace call span out of bounds");
        if (!first && c.start < prev_end) throw DataError("trace call spans overlap");
        if (!first && c.start == prev_end)
            throw DataError("adjacent result spans need a separating token");
        prev_end = c.end;
        first = false;
    }
}

// In-memory paired sequence. targets[i] is the fused target aligned with
// position i (predicted from tokens[0..i-1]); kSentinelTarget marks [N/A].
constexpr int64_t kSentinelTarget = -1;

struct ParallelSequence {
    std::vector<uint32_t> tokens;   // s
    std::vector<int64_t> targets;   // s'

    size_t toolken_target_count(const ToolkenVocab& vocab) const {
        size_t n = 0;
        for (int64_t t : targets)
            if (t >= 0 && vocab.is_toolken(static_cast<FusedId>(t))) ++n;
        return n;
    }

    size_t sentinel_count() const {
        size_t n = 0;
        for (int64_t t : targets)
            if (t == kSentinelTarget) ++n;
        return n;
    }
};

struct PlanSequence {
    std::string prompt_text;
    std::vector<FusedId> plan;  // alternating action/object toolkens, ends with [END]
    bool complete = false;      // [END] reached before the budget
};

namespace detail {

// Token start offsets recovered from per-token text; verifies the tokenizer
// is lossless over this text.
inline std::vector<uint32_t> token_offsets(const LMBackend& backend,
                                           const std::vector<uint32_t>& ids,
                                           const std::string& text) {
    std::vector<uint32_t> offsets;
    offsets.reserve(ids.size() + 1);
    uint32_t pos = 0;
    for (uint32_t id : ids) {
        offsets.push_back(pos);
        std::array<uint32_t, 1> one{id};
        pos += static_cast<uint32_t>(backend.detokenize(one).size());
    }
    offsets.push_back(pos);
    if (pos != text.size() || backend.detokenize(ids) != text)
        throw DataError("tokenizer does not round-trip this text");
    return offsets;
}

inline bool on_boundary(const std::vector<uint32_t>& offsets, uint32_t byte_pos) {
    return std::binary_search(offsets.begin(), offsets.end(), byte_pos);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// build_parallel: pair an annotated trace with its fused target sequence.
// The target at the position predicting the first result-span token is the
// toolken; the remaining span tokens are [N/A]; everywhere else the target is
// the word token itself. If a span start does not fall on a token boundary a
// single space is inserted before the result and the pairing is retried.

inline ParallelSequence build_parallel(const AnnotatedTrace& input, const LMBackend& backend,
                                       const ToolkenVocab& vocab) {
    validate_trace(input);
    AnnotatedTrace trace = input;

    for (int attempt = 0;; ++attempt) {
        std::vector<uint32_t> ids = backend.tokenize(trace.text);
        if (ids.empty()) throw DataError("trace tokenizes to nothing");
        std::vector<uint32_t> offsets = detail::token_offsets(backend, ids, trace.text);

        std::optional<uint32_t> misaligned_start;
        for (const auto& c : trace.calls) {
            if (!detail::on_boundary(offsets, c.start)) {
                misaligned_start = c.start;
                break;
            }
            if (!detail::on_boundary(offsets, c.end))
                throw DataError("result span end not on a token boundary: [" +
                                std::to_string(c.start) + ", " + std::to_string(c.end) + ")");
        }
        if (misaligned_start) {
            if (attempt >= 8)
                throw DataError("result span still misaligned after preprocessing");
            trace.text.insert(trace.text.begin() + *misaligned_start, ' ');
            for (auto& c : trace.calls) {
                if (c.start >= *misaligned_start) {
                    ++c.start;
                    ++c.end;
                }
            }
            continue;
        }

        ParallelSequence out;
        out.tokens = ids;
        out.targets.resize(ids.size());
        for (size_t i = 0; i < ids.size(); ++i) out.targets[i] = ids[i];

        for (const auto& c : trace.calls) {
            auto id = vocab.lookup(c.tool);
            if (!id) throw DataError("unknown tool name in trace: " + c.tool);
            size_t k0 = size_t(std::lower_bound(offsets.begin(), offsets.end(), c.start) -
                               offsets.begin());
            if (k0 == 0)
                throw DataError("result span at the start of the trace has no context");
            size_t k1 = size_t(std::lower_bound(offsets.begin(), offsets.end(), c.end) -
                               offsets.begin());
            out.targets[k0] = static_cast<int64_t>(*id);
            for (size_t k = k0 + 1; k < k1; ++k) out.targets[k] = kSentinelTarget;
        }
        return out;
    }
}

// ---------------------------------------------------------------------------
// Trace / template JSONL.

inline nlohmann::json trace_to_json(const AnnotatedTrace& t) {
    nlohmann::json doc;
    doc["text"] = t.text;
    nlohmann::json calls = nlohmann::json::array();
    for (const auto& c : t.calls)
        calls.push_back({{"start", c.start}, {"end", c.end}, {"tool", c.tool},
                         {"args", c.raw_args}});
    doc["calls"] = std::move(calls);
    return doc;
}

inline AnnotatedTrace trace_from_json(const nlohmann::json& doc) {
    AnnotatedTrace t;
    t.text = doc.at("text").get<std::string>();
    for (const auto& jc : doc.at("calls")) {
        CallAnnotation c;
        c.start = jc.at("start").get<uint32_t>();
        c.end = jc.at("end").get<uint32_t>();
        c.tool = jc.at("tool").get<std::string>();
        c.raw_args = jc.value("args", std::string());
        t.calls.push_back(std::move(c));
    }
    validate_trace(t);
    return t;
}

inline std::string traces_to_jsonl(const std::vector<AnnotatedTrace>& traces) {
    std::string out;
    for (const auto& t : traces) out += trace_to_json(t).dump() + "\n";
    return out;
}

inline std::vector<AnnotatedTrace> traces_from_jsonl(const std::string& content) {
    std::vector<AnnotatedTrace> out;
    size_t pos = 0, line_no = 0;
    while (pos < content.size()) {
        size_t nl = content.find('\n', pos);
        std::string_view line(content.data() + pos,
                              (nl == std::string::npos ? content.size() : nl) - pos);
        pos = (nl == std::string::npos) ? content.size() : nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded())
            throw DataError("traces jsonl line " + std::to_string(line_no) + ": parse error");
        out.push_back(trace_from_json(doc));
    }
    return out;
}

struct TemplatePattern {
    std::string tool;
    std::string pattern;  // {a}, {b} operand slots in argument order, {r} result
};

inline std::vector<TemplatePattern> templates_from_jsonl(const std::string& content) {
    std::vector<TemplatePattern> out;
    size_t pos = 0, line_no = 0;
    while (pos < content.size()) {
        size_t nl = content.find('\n', pos);
        std::string_view line(content.data() + pos,
                              (nl == std::string::npos ? content.size() : nl) - pos);
        pos = (nl == std::string::npos) ? content.size() : nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
        if (doc.is_discarded())
            throw DataError("templates jsonl line " + std::to_string(line_no) + ": parse error");
        out.push_back({doc.at("tool").get<std::string>(), doc.at("pattern").get<std::string>()});
    }
    return out;
}

inline std::string templates_to_jsonl(const std::vector<TemplatePattern>& templates) {
    std::string out;
    for (const auto& t : templates)
        out += nlohmann::json{{"tool", t.tool}, {"pattern", t.pattern}}.dump() + "\n";
    return out;
}

// Stand-in for LLM-based template synthesis: anything that can produce
// candidate QA patterns for a tool. The file/built-in sources are the default
// implementations.
class TemplateSource {
public:
    virtual ~TemplateSource() = default;
    virtual std::vector<TemplatePattern> templates_for(const ToolSpec& tool) const = 0;
};

// Built-in one-hop QA patterns for the 13 arithmetic operators. Operand slots
// appear in argument order so demonstrations show operands the way the tool
// consumes them.
inline const std::vector<TemplatePattern>& builtin_arith_templates() {
    static const std::vector<TemplatePattern> t = {
        {"add", "Question: What is the sum of {a} and {b}?\nAnswer: The answer is {r}."},
        {"add", "Question: What is {a} plus {b}?\nAnswer: The answer is {r}."},
        {"add", "Question: If you add {a} and {b}, what is the total?\nAnswer: The answer is {r}."},
        {"subtract", "Question: What is {a} minus {b}?\nAnswer: The answer is {r}."},
        {"subtract",
         "Question: What is the difference of {a} and {b}?\nAnswer: The answer is {r}."},
        {"multiply", "Question: What is {a} times {b}?\nAnswer: The answer is {r}."},
        {"multiply",
         "Question: What is the product of {a} and {b}?\nAnswer: The answer is {r}."},
        {"divide", "Question: What is {a} divided by {b}?\nAnswer: The answer is {r}."},
        {"divide",
         "Question: What is the quotient of {a} and {b}?\nAnswer: The answer is {r}."},
        {"power", "Question: What is {a} raised to the power of {b}?\nAnswer: The answer is {r}."},
        {"power", "Question: What is {a} to the power {b}?\nAnswer: The answer is {r}."},
        {"sqrt", "Question: What is the square root of {a}?\nAnswer: The answer is {r}."},
        {"log", "Question: What is the logarithm base ten of {a}?\nAnswer: The answer is {r}."},
        {"ln", "Question: What is the natural logarithm of {a}?\nAnswer: The answer is {r}."},
        {"lcm",
         "Question: What is the least common multiple of {a} and {b}?\nAnswer: The answer is "
         "{r}."},
        {"gcd",
         "Question: What is the greatest common divisor of {a} and {b}?\nAnswer: The answer "
         "is {r}."},
        {"remainder",
         "Question: What is the remainder of {a} divided by {b}?\nAnswer: The answer is {r}."},
        {"choose",
         "Question: From {a} items, how many ways are there to choose {b}?\nAnswer: The "
         "answer is {r}."},
        {"permutate",
         "Question: From {a} items, how many arrangements of {b} can you pick?\nAnswer: The "
         "answer is {r}."},
    };
    return t;
}

class BuiltinTemplateSource final : public TemplateSource {
public:
    std::vector<TemplatePattern> templates_for(const ToolSpec& tool) const override {
        std::vector<TemplatePattern> out;
        for (const auto& t : builtin_arith_templates())
            if (t.tool == tool.name) out.push_back(t);
        return out;
    }
};

class FileTemplateSource final : public TemplateSource {
public:
    explicit FileTemplateSource(std::vector<TemplatePattern> templates)
        : templates_(std::move(templates)) {}

    std::vector<TemplatePattern> templates_for(const ToolSpec& tool) const override {
        std::vector<TemplatePattern> out;
        for (const auto& t : templates_)
            if (t.tool == tool.name) out.push_back(t);
        return out;
    }

private:
    std::vector<TemplatePattern> templates_;
};

// ---------------------------------------------------------------------------
// Synthetic one-hop arithmetic traces.

namespace detail {

struct Operands {
    std::vector<double> values;
};

inline double round1(double v) { return std::round(v * 10.0) / 10.0; }

inline Operands sample_operands(const std::string& op, Rng& rng) {
    Operands o;
    if (op == "add") {
        if (rng.uniform01() < 0.2) {
            o.values = {round1(rng.uniform(2, 200)), round1(rng.uniform(2, 200))};
        } else {
            o.values = {double(rng.uniform_int(2, 900)), double(rng.uniform_int(2, 900))};
        }
    } else if (op == "subtract") {
        int64_t a = rng.uniform_int(50, 900);
        o.values = {double(a), double(rng.uniform_int(2, a - 1))};
    } else if (op == "multiply") {
        if (rng.uniform01() < 0.25) {
            o.values = {double(rng.uniform_int(3, 99)), round1(rng.uniform(1.1, 9.9))};
        } else {
            o.values = {double(rng.uniform_int(3, 99)), double(rng.uniform_int(3, 99))};
        }
    } else if (op == "divide") {
        o.values = {double(rng.uniform_int(10, 900)), double(rng.uniform_int(2, 99))};
    } else if (op == "power") {
        o.values = {double(rng.uniform_int(2, 12)), double(rng.uniform_int(2, 4))};
    } else if (op == "sqrt") {
        if (rng.uniform01() < 0.6) {
            int64_t k = rng.uniform_int(2, 40);
            o.values = {double(k * k)};
        } else {
            o.values = {double(rng.uniform_int(2, 900))};
        }
    } else if (op == "log") {
        if (rng.uniform01() < 0.5) {
            int64_t k = rng.uniform_int(1, 4);
            double v = 1;
            for (int64_t i = 0; i < k; ++i) v *= 10;
            o.values = {v};
        } else {
            o.values = {double(rng.uniform_int(2, 9999))};
        }
    } else if (op == "ln") {
        o.values = {double(rng.uniform_int(2, 400))};
    } else if (op == "lcm" || op == "gcd") {
        o.values = {double(rng.uniform_int(4, 96)), double(rng.uniform_int(4, 96))};
    } else if (op == "remainder") {
        o.values = {double(rng.uniform_int(10, 500)), double(rng.uniform_int(2, 30))};
    } else if (op == "choose") {
        int64_t n = rng.uniform_int(5, 18);
        o.values = {double(n), double(rng.uniform_int(1, std::min<int64_t>(6, n - 1)))};
    } else if (op == "permutate") {
        int64_t n = rng.uniform_int(5, 14);
        o.values = {double(n), double(rng.uniform_int(1, 5))};
    } else {
        throw DataError("no operand sampler for operator " + op);
    }
    return o;
}

inline std::string fill_slot(std::string text, const std::string& slot,
                             const std::string& value) {
    for (std::string::size_type p; (p = text.find(slot)) != std::string::npos;)
        text.replace(p, slot.size(), value);
    return text;
}

}  // namespace detail

// n synthetic traces for one operator. Deterministic under a fixed seed; the
// result substring always equals the executor's output for the sampled
// operands. Magnification multiplies the operands of the four basic operators
// by 10^magnify_exponent and recomputes the result, for harder large-number
// variants of the same questions.
inline std::vector<AnnotatedTrace> synth_onehop(const std::string& op,
                                                const std::vector<TemplatePattern>& templates,
                                                size_t n, uint64_t seed,
                                                int magnify_exponent = 0) {
    std::vector<TemplatePattern> mine;
    for (const auto& t : templates)
        if (t.tool == op) mine.push_back(t);
    if (mine.empty()) throw DataError("no templates for operator " + op);
    for (const auto& t : mine) {
        if (t.pattern.find("{r}") == std::string::npos)
            throw DataError("template for " + op + " lacks the {r} result slot");
        if (t.pattern.find("{a}") == std::string::npos)
            throw DataError("template for " + op + " lacks the {a} operand slot");
    }

    const bool basic = std::find(basic_four().begin(), basic_four().end(), op) !=
                       basic_four().end();
    double scale = 1.0;
    for (int i = 0; i < magnify_exponent && basic; ++i) scale *= 10.0;

    Rng rng(seed ^ std::hash<std::string>{}(op));
    std::vector<AnnotatedTrace> out;
    out.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const TemplatePattern& tpl = mine[i % mine.size()];
        double result = 0;
        detail::Operands ops;
        bool ok = false;
        for (int tries = 0; tries < 64 && !ok; ++tries) {
            ops = detail::sample_operands(op, rng);
            for (auto& v : ops.values) v *= scale;
            try {
                result = exec_arith(op, ops.values);
                ok = true;
            } catch (const ArithError&) {
                // out-of-domain sample, retry
            }
        }
        if (!ok) throw DataError("could not sample in-domain operands for " + op);

        std::string text = tpl.pattern;
        text = detail::fill_slot(text, "{a}", render_number(ops.values[0]));
        if (ops.values.size() > 1)
            text = detail::fill_slot(text, "{b}", render_number(ops.values[1]));
        size_t rpos = text.find("{r}");
        if (rpos == std::string::npos) throw InternalError("result slot vanished");
        const std::string rendered = render_number(result);
        text.replace(rpos, 3, rendered);

        AnnotatedTrace trace;
        trace.text = std::move(text);
        CallAnnotation call;
        call.start = static_cast<uint32_t>(rpos);
        call.end = static_cast<uint32_t>(rpos + rendered.size());
        call.tool = op;
        call.raw_args = render_number(ops.values[0]);
        for (size_t k = 1; k < ops.values.size(); ++k)
            call.raw_args += ", " + render_number(ops.values[k]);
        trace.calls.push_back(std::move(call));
        out.push_back(std::move(trace));
    }
    return out;
}

// ---------------------------------------------------------------------------
// KB fact -> QA trace.

inline AnnotatedTrace kb_to_qa(const KbFact& fact, const TripleStore& store) {
    if (fact.subject.empty() || fact.object.empty())
        throw DataError("kb_to_qa: empty subject or object");
    const std::string question = store.fill_template(fact.relation, fact.subject);
    AnnotatedTrace trace;
    trace.text = "Question: " + question + "\nAnswer: The answer is ";
    CallAnnotation call;
    call.start = static_cast<uint32_t>(trace.text.size());
    call.end = static_cast<uint32_t>(trace.text.size() + fact.object.size());
    call.tool = fact.relation;
    call.raw_args = fact.subject;
    trace.text += fact.object + ".";
    trace.calls.push_back(std::move(call));
    return trace;
}

// ---------------------------------------------------------------------------
// KB evaluation subsets: nested relation samples of the requested sizes.

struct KbSubset {
    std::vector<std::string> relations;  // the tools plugged in for this subset
    std::vector<KbFact> questions;
};

inline std::vector<KbSubset> sample_kb_subsets(const std::vector<KbFact>& testset,
                                               const std::vector<size_t>& relation_counts,
                                               size_t subset_size, uint64_t seed) {
    std::vector<std::string> relations;
    {
        std::set<std::string> seen;
        for (const auto& f : testset)
            if (seen.insert(f.relation).second) relations.push_back(f.relation);
    }
    size_t max_count = 0;
    for (size_t c : relation_counts) max_count = std::max(max_count, c);
    if (relations.size() < max_count)
        throw DataError("testset covers " + std::to_string(relations.size()) +
                        " relations, need " + std::to_string(max_count));

    Rng rng(seed);
    rng.shuffle(relations);  // prefix-nested relation samples

    std::vector<KbSubset> subsets;
    for (size_t count : relation_counts) {
        KbSubset subset;
        subset.relations.assign(relations.begin(), relations.begin() + count);
        std::set<std::string> chosen(subset.relations.begin(), subset.relations.end());
        std::vector<KbFact> pool;
        for (const auto& f : testset)
            if (chosen.count(f.relation)) pool.push_back(f);
        if (pool.size() < subset_size)
            throw DataError("not enough questions for a " + std::to_string(count) +
                            "-relation subset of size " + std::to_string(subset_size));
        Rng sub_rng(seed ^ (0x9e3779b97f4a7c15ULL * (count + 1)));
        sub_rng.shuffle(pool);
        pool.resize(subset_size);
        subset.questions = std::move(pool);
        subsets.push_back(std::move(subset));
    }
    return subsets;
}

// ---------------------------------------------------------------------------
// Plan-mode sequences. The rendered text is the prompt followed by
// "[ACTION] <object> ... [END]"; each rendered step is one masked region
// whose first token carries the toolken target.

inline std::string render_plan_step(const ToolSpec& spec) {
    switch (spec.kind) {
        case ToolKind::NoArgAction: return "[" + spec.name + "] ";
        case ToolKind::NoArgObject: return "<" + spec.name + "> ";
        case ToolKind::EndMarker: return "[" + spec.name + "]";
        default: throw DataError("plan step must be a no-arg toolken: " + spec.name);
    }
}

inline ParallelSequence build_plan_sequence(const PlanScenario& scenario,
                                            const LMBackend& backend,
                                            const ToolkenVocab& vocab) {
    if (scenario.demo_plan.empty())
        throw DataError("scenario has no demonstration plan");
    const std::string prompt = plan_prompt(scenario);

    std::vector<uint32_t> tokens = backend.tokenize(prompt);
    std::vector<int64_t> targets(tokens.begin(), tokens.end());

    auto append_step = [&](FusedId id) {
        const std::string rendered = render_plan_step(vocab.tool_for(id));
        std::vector<uint32_t> step_tokens = backend.tokenize(rendered);
        if (step_tokens.empty()) throw InternalError("empty plan step rendering");
        tokens.insert(tokens.end(), step_tokens.begin(), step_tokens.end());
        targets.push_back(static_cast<int64_t>(id));
        for (size_t k = 1; k < step_tokens.size(); ++k) targets.push_back(kSentinelTarget);
    };

    for (const auto& [action, object] : scenario.demo_plan) {
        auto aid = vocab.lookup(action);
        auto oid = vocab.lookup(object);
        if (!aid || !oid)
            throw DataError("plan uses unregistered toolken: " + action + "/" + object);
        append_step(*aid);
        append_step(*oid);
    }
    append_step(vocab.fused_id_of(kEndMarkerName));

    ParallelSequence out;
    out.tokens = std::move(tokens);
    out.targets = std::move(targets);
    return out;
}

}  // namespace toolken
