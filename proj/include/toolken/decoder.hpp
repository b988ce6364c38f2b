#pragma once

// Dual-mode generation. Reasoning mode decodes over the fused vocabulary
// (word logits unchanged, toolken logits W_tau . h plus an optional bias).
// When a function toolken fires, the decoder switches to tool mode: a fresh
// prompt of per-tool demonstrations plus the current context ending with
// "[name](", completed greedily until the closing parenthesis. The executed
// result is injected back into the reasoning context as bare text; the call
// itself is preserved only in the transcript. Plan mode masks decoding to
// action/object toolkens alternately and injects each step's rendered text.

#include <cmath>
#include <deque>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "toolken/common.hpp"
#include "toolken/core.hpp"
#include "toolken/data.hpp"
#include "toolken/lm.hpp"
#include "toolken/trainer.hpp"

namespace toolken {

enum class DecodeStrategy { Greedy, Sample };
enum class ToolErrorPolicy { ResampleExcluding, Abort };

struct DecodeConfig {
    DecodeStrategy strategy = DecodeStrategy::Greedy;
    double temperature = 1.0;
    uint64_t seed = 0;
    size_t max_new_tokens = 128;
    size_t max_tool_calls = 8;
    double toolken_bias = 0.0;      // added to every toolken logit; -inf disables tools
    size_t tool_mode_demos = 4;     // demonstrations per tool-mode prompt
    size_t max_arg_tokens = 48;
    ToolErrorPolicy on_tool_error = ToolErrorPolicy::ResampleExcluding;
    FingerprintPolicy fingerprint_policy = FingerprintPolicy::Warn;
    // when non-empty, only these tools are plugged in; the rest stay masked
    std::set<std::string> tool_allowlist;

    void validate() const {
        if (max_new_tokens < 1) throw UsageError("max_new_tokens must be at least 1");
        if (strategy == DecodeStrategy::Sample && temperature <= 0)
            throw UsageError("temperature must be positive");
        if (std::isnan(toolken_bias)) throw UsageError("toolken_bias must not be NaN");
    }
};

enum class StopReason { Eos, EndToolken, Budget, Error };

inline std::string stop_reason_name(StopReason r) {
    switch (r) {
        case StopReason::Eos: return "eos";
        case StopReason::EndToolken: return "end-toolken";
        case StopReason::Budget: return "budget";
        case StopReason::Error: return "error";
    }
    throw InternalError("unknown StopReason");
}

struct TranscriptCall {
    ToolCall call;
    size_t result_offset = 0;  // byte offset of the injected result in final_text
};

struct Transcript {
    struct Segment {
        bool is_call = false;
        std::string text;       // when !is_call
        TranscriptCall call;    // when is_call
    };

    std::string prompt;
    std::vector<Segment> segments;
    std::string final_text;  // prompt + generated text with ok results injected
    StopReason stop_reason = StopReason::Eos;

    std::vector<const TranscriptCall*> calls() const {
        std::vector<const TranscriptCall*> out;
        for (const auto& s : segments)
            if (s.is_call) out.push_back(&s.call);
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json doc;
        doc["prompt"] = prompt;
        nlohmann::json segs = nlohmann::json::array();
        for (const auto& s : segments) {
            if (!s.is_call) {
                segs.push_back({{"text", s.text}});
            } else {
                nlohmann::json jc;
                jc["tool"] = s.call.call.tool;
                jc["args"] = s.call.call.raw_args;
                jc["status"] = call_status_name(s.call.call.status);
                if (s.call.call.result) jc["result"] = s.call.call.result->text;
                if (!s.call.call.error.empty()) jc["error"] = s.call.call.error;
                jc["result_offset"] = s.call.result_offset;
                segs.push_back(std::move(jc));
            }
        }
        doc["segments"] = std::move(segs);
        doc["final_text"] = final_text;
        doc["stop_reason"] = stop_reason_name(stop_reason);
        return doc;
    }
};

// ---------------------------------------------------------------------------

class DecodeSession {
public:
    DecodeSession(const LMBackend& backend, const ToolRegistry& registry,
                  const ToolkenEmbeddings& embeddings, DecodeConfig config)
        : backend_(backend),
          registry_(registry),
          vocab_(registry.vocab()),
          emb_(embeddings),
          cfg_(config),
          rng_(config.seed) {
        cfg_.validate();
        if (emb_.tool_count() != vocab_.tool_count())
            throw UsageError("embeddings do not cover the vocabulary");
        for (size_t j = 0; j < vocab_.tool_count(); ++j)
            if (vocab_.tool_at(j).name != emb_.tool_names[j])
                throw UsageError("embedding/vocab tool order mismatch");
        if (vocab_.base_vocab_size() != backend_.vocab_size())
            throw UsageError("vocab base size does not match the backend");
        if (emb_.hidden_dim != backend_.hidden_dim())
            throw UsageError("embedding dim does not match the backend");
        check_fingerprint(emb_, backend_, cfg_.fingerprint_policy, &fingerprint_warning_);
        for (const auto& t : vocab_.tools()) {
            if (t.kind == ToolKind::FunctionWithArgs && t.demonstrations.empty())
                throw UsageError("tool " + t.name +
                                 " takes arguments but has no demonstrations");
        }
        if (!cfg_.tool_allowlist.empty()) {
            for (const auto& name : cfg_.tool_allowlist)
                if (!vocab_.lookup(name)) throw UsageError("allowlist names unknown tool " + name);
            for (size_t j = 0; j < vocab_.tool_count(); ++j)
                if (!cfg_.tool_allowlist.count(vocab_.tool_at(j).name))
                    unplugged_.insert(vocab_.base_vocab_size() + static_cast<FusedId>(j));
        }
    }

    const std::string& fingerprint_warning() const { return fingerprint_warning_; }

    // One reasoning-mode step over the fused vocabulary. `masked` entries are
    // excluded; `allowed` (when non-empty) restricts the choice set.
    FusedId next_token(const LMSession& lm, const std::set<FusedId>& masked = {},
                       const std::set<FusedId>* allowed = nullptr) {
        const HiddenState h = lm.current_hidden();
        const WordLogits wl = lm.current_word_logits();
        std::vector<float> fused = fused_logits(h, wl, emb_);
        const size_t base = wl.size();
        for (size_t j = 0; j < emb_.tool_count(); ++j)
            fused[base + j] = static_cast<float>(double(fused[base + j]) + cfg_.toolken_bias);
        for (FusedId id : unplugged_)
            if (id < fused.size()) fused[id] = -HUGE_VALF;
        for (FusedId id : masked)
            if (id < fused.size()) fused[id] = -HUGE_VALF;

        auto usable = [&](size_t id) {
            if (allowed && !allowed->count(static_cast<FusedId>(id))) return false;
            return fused[id] > -HUGE_VALF;
        };

        if (cfg_.strategy == DecodeStrategy::Greedy) {
            // ties break toward the lowest fused id: words before toolkens
            size_t best = fused.size();
            for (size_t id = 0; id < fused.size(); ++id) {
                if (!usable(id)) continue;
                if (best == fused.size() || fused[id] > fused[best]) best = id;
            }
            if (best == fused.size()) throw DataError("decode step has no usable token");
            return static_cast<FusedId>(best);
        }

        // temperature sampling over the renormalized usable set
        double zmax = -HUGE_VAL;
        for (size_t id = 0; id < fused.size(); ++id)
            if (usable(id)) zmax = std::max(zmax, double(fused[id]) / cfg_.temperature);
        if (zmax == -HUGE_VAL) throw DataError("decode step has no usable token");
        double sum = 0.0;
        for (size_t id = 0; id < fused.size(); ++id)
            if (usable(id)) sum += std::exp(double(fused[id]) / cfg_.temperature - zmax);
        double u = rng_.uniform01() * sum;
        double acc = 0.0;
        for (size_t id = 0; id < fused.size(); ++id) {
            if (!usable(id)) continue;
            acc += std::exp(double(fused[id]) / cfg_.temperature - zmax);
            if (u <= acc) return static_cast<FusedId>(id);
        }
        for (size_t id = fused.size(); id-- > 0;)
            if (usable(id)) return static_cast<FusedId>(id);
        throw InternalError("sampling fell through");
    }

    // ------------------------------------------------------------------
    // Reasoning-mode generation with tool calls.

    Transcript generate(const std::string& prompt) {
        Transcript out;
        out.prompt = prompt;
        out.final_text = prompt;

        std::vector<uint32_t> prompt_ids = backend_.tokenize(prompt);
        if (prompt_ids.empty()) throw DataError("prompt tokenizes to nothing");
        auto lm = backend_.start_session();
        for (uint32_t id : prompt_ids) lm->append(id);

        std::string text_buffer;
        auto flush_text = [&] {
            if (text_buffer.empty()) return;
            Transcript::Segment seg;
            seg.text = std::move(text_buffer);
            text_buffer.clear();
            out.segments.push_back(std::move(seg));
        };

        std::set<FusedId> masked;
        size_t calls_made = 0;
        size_t failures_this_step = 0;
        // a repeat of the previous ok call with no text in between is a
        // degenerate loop, not a new tool use
        std::string last_ok_call;
        bool text_since_call = true;

        for (size_t steps = 0;; ++steps) {
            if (steps >= cfg_.max_new_tokens) {
                out.stop_reason = StopReason::Budget;
                break;
            }
            std::set<FusedId> step_mask = masked;
            if (calls_made >= cfg_.max_tool_calls)
                for (size_t j = 0; j < vocab_.tool_count(); ++j)
                    step_mask.insert(vocab_.base_vocab_size() + static_cast<FusedId>(j));
            // no-arg toolkens belong to plan mode
            for (size_t j = 0; j < vocab_.tool_count(); ++j) {
                ToolKind k = vocab_.tool_at(j).kind;
                if (k == ToolKind::NoArgAction || k == ToolKind::NoArgObject)
                    step_mask.insert(vocab_.base_vocab_size() + static_cast<FusedId>(j));
            }

            const FusedId id = next_token(*lm, step_mask);

            if (vocab_.is_word(id)) {
                if (id == backend_.eos_id()) {
                    out.stop_reason = StopReason::Eos;
                    break;
                }
                lm->append(id);
                std::array<uint32_t, 1> one{id};
                const std::string piece = backend_.detokenize(one);
                text_buffer += piece;
                out.final_text += piece;
                masked.clear();
                failures_this_step = 0;
                text_since_call = true;
                continue;
            }

            const ToolSpec& spec = vocab_.tool_for(id);
            if (spec.kind == ToolKind::EndMarker) {
                out.stop_reason = StopReason::EndToolken;
                break;
            }

            ToolCall call = run_tool_mode(spec, out.final_text);
            if (call.status == CallStatus::Ok && !text_since_call &&
                spec.name + "(" + call.raw_args + ")" == last_ok_call) {
                call.status = CallStatus::ExecError;
                call.result.reset();
                call.error = "consecutive duplicate call suppressed";
            }
            ++calls_made;
            flush_text();
            Transcript::Segment seg;
            seg.is_call = true;
            seg.call.call = call;
            seg.call.result_offset = out.final_text.size();
            out.segments.push_back(seg);

            if (call.status == CallStatus::Ok) {
                const std::string& injected = call.result->text;
                for (uint32_t tid : backend_.tokenize(injected)) lm->append(tid);
                out.final_text += injected;
                masked.clear();
                failures_this_step = 0;
                last_ok_call = spec.name + "(" + call.raw_args + ")";
                text_since_call = false;
            } else {
                if (cfg_.on_tool_error == ToolErrorPolicy::Abort ||
                    ++failures_this_step > 3) {
                    out.stop_reason = StopReason::Error;
                    break;
                }
                masked.insert(id);  // re-decode this step without the failed toolken
            }
        }
        flush_text();
        return out;
    }

    // ------------------------------------------------------------------
    // Plan mode: strictly alternating action/object toolkens, [END] only at
    // action steps, words never.

    PlanSequence generate_plan(const std::string& prompt) {
        std::set<FusedId> actions, objects;
        FusedId end_id = 0;
        bool have_end = false;
        for (size_t j = 0; j < vocab_.tool_count(); ++j) {
            const FusedId id = vocab_.base_vocab_size() + static_cast<FusedId>(j);
            switch (vocab_.tool_at(j).kind) {
                case ToolKind::NoArgAction: actions.insert(id); break;
                case ToolKind::NoArgObject: objects.insert(id); break;
                case ToolKind::EndMarker: end_id = id; have_end = true; break;
                case ToolKind::FunctionWithArgs:
                    throw UsageError("plan mode requires a no-arg vocabulary");
            }
        }
        if (!have_end || actions.empty() || objects.empty())
            throw UsageError("plan vocabulary needs actions, objects and [END]");

        PlanSequence out;
        out.prompt_text = prompt;

        std::vector<uint32_t> prompt_ids = backend_.tokenize(prompt);
        if (prompt_ids.empty()) throw DataError("prompt tokenizes to nothing");
        auto lm = backend_.start_session();
        for (uint32_t id : prompt_ids) lm->append(id);

        std::set<FusedId> action_step = actions;
        action_step.insert(end_id);

        bool at_action = true;
        for (size_t steps = 0; steps < cfg_.max_new_tokens; ++steps) {
            const std::set<FusedId>& allowed = at_action ? action_step : objects;
            const FusedId id = next_token(*lm, {}, &allowed);
            out.plan.push_back(id);
            if (id == end_id) {
                out.complete = true;
                break;
            }
            for (uint32_t tid : backend_.tokenize(render_plan_step(vocab_.tool_for(id))))
                lm->append(tid);
            at_action = !at_action;
        }
        return out;
    }

    // Plan toolkens as (action, object) name pairs, end marker dropped.
    std::vector<std::pair<std::string, std::string>> plan_steps(const PlanSequence& plan) const {
        std::vector<std::pair<std::string, std::string>> steps;
        for (size_t i = 0; i + 1 < plan.plan.size(); i += 2) {
            const ToolSpec& a = vocab_.tool_for(plan.plan[i]);
            if (a.kind == ToolKind::EndMarker) break;
            const ToolSpec& o = vocab_.tool_for(plan.plan[i + 1]);
            steps.emplace_back(a.name, o.name);
        }
        return steps;
    }

private:
    // Tool mode: demonstrations of this tool plus the reasoning context
    // ending with "[name]("; greedy word-token completion to the closing
    // parenthesis.
    ToolCall run_tool_mode(const ToolSpec& spec, const std::string& reasoning_text) {
        ToolCall call;
        call.tool = spec.name;

        std::string prompt;
        const size_t demo_count = std::min(cfg_.tool_mode_demos, spec.demonstrations.size());
        for (size_t i = 0; i < demo_count; ++i) prompt += spec.demonstrations[i].text + "\n";
        prompt += reasoning_text + "[" + spec.name + "](";

        auto lm = backend_.start_session();
        for (uint32_t id : backend_.tokenize(prompt)) lm->append(id);

        std::string generated;
        bool closed = false;
        bool in_quotes = false;
        for (size_t t = 0; t < cfg_.max_arg_tokens && !closed; ++t) {
            // word tokens only in tool mode
            const WordLogits wl = lm->current_word_logits();
            size_t best = wl.size();
            for (size_t id = 0; id < wl.size(); ++id)
                if (best == wl.size() || wl[id] > wl[best]) best = id;
            const uint32_t id = static_cast<uint32_t>(best);
            if (id == backend_.eos_id()) break;
            lm->append(id);
            std::array<uint32_t, 1> one{id};
            const std::string piece = backend_.detokenize(one);
            for (char c : piece) {
                if (c == '"') in_quotes = !in_quotes;
                if (c == ')' && !in_quotes) {
                    closed = true;
                    break;
                }
                generated.push_back(c);
            }
        }
        call.raw_args = generated;
        if (!closed) {
            call.status = CallStatus::ParseError;
            call.error = "argument budget exhausted without a closing parenthesis";
            return call;
        }

        if (!parse_arguments(spec, generated, call)) return call;

        try {
            call.result = registry_.execute(spec.name, call.parsed_args);
            call.status = CallStatus::Ok;
        } catch (const std::exception& e) {
            call.status = CallStatus::ExecError;
            call.error = e.what();
        }
        return call;
    }

    // Comma-separated scalars; a single entity-string schema consumes the
    // whole raw text (entities may contain commas).
    static bool parse_arguments(const ToolSpec& spec, const std::string& raw, ToolCall& call) {
        if (spec.arg_schema.size() == 1 && spec.arg_schema[0].kind == ArgKind::EntityString) {
            std::string entity = trim(raw);
            if (entity.empty()) {
                call.status = CallStatus::ParseError;
                call.error = "empty entity argument";
                return false;
            }
            call.parsed_args.emplace_back(std::move(entity));
            return true;
        }
        std::vector<std::string> parts;
        std::string cur;
        bool in_quotes = false;
        for (char c : raw) {
            if (c == '"') in_quotes = !in_quotes;
            if (c == ',' && !in_quotes) {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        parts.push_back(cur);
        if (parts.size() != spec.arg_schema.size()) {
            call.status = CallStatus::ParseError;
            call.error = "expected " + std::to_string(spec.arg_schema.size()) +
                         " arguments, got " + std::to_string(parts.size());
            return false;
        }
        for (size_t i = 0; i < parts.size(); ++i) {
            if (spec.arg_schema[i].kind == ArgKind::Number) {
                auto v = parse_number(parts[i]);
                if (!v) {
                    call.status = CallStatus::ParseError;
                    call.error = "argument '" + trim(parts[i]) + "' is not a number";
                    call.parsed_args.clear();
                    return false;
                }
                call.parsed_args.emplace_back(*v);
            } else {
                call.parsed_args.emplace_back(trim(parts[i]));
            }
        }
        return true;
    }

    const LMBackend& backend_;
    const ToolRegistry& registry_;
    const ToolkenVocab& vocab_;
    const ToolkenEmbeddings& emb_;
    DecodeConfig cfg_;
    Rng rng_;
    std::string fingerprint_warning_;
    std::set<FusedId> unplugged_;
};

}  // namespace toolken
