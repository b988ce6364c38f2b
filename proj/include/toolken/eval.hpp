#pragma once

// Scoring: answer extraction from transcripts, numeric scoring (2-decimal
// exact match or 0.1% relative tolerance), normalized KB string match, and
// plan metrics (grounding / executable / success / success-relaxed).

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "toolken/common.hpp"
#include "toolken/decoder.hpp"
#include "toolken/minihome.hpp"

namespace toolken {

// Last parsable number anywhere in the text; nullopt when there is none.
inline std::optional<double> extract_last_number(const std::string& text) {
    std::optional<double> found;
    size_t i = 0;
    while (i < text.size()) {
        const bool digit = detail::is_digit(static_cast<uint8_t>(text[i]));
        bool neg = text[i] == '-' && i + 1 < text.size() &&
                   detail::is_digit(static_cast<uint8_t>(text[i + 1]));
        if (!digit && !neg) {
            ++i;
            continue;
        }
        size_t e = i + (neg ? 1 : 0);
        while (e < text.size() && detail::is_digit(static_cast<uint8_t>(text[e]))) ++e;
        if (e + 1 < text.size() && text[e] == '.' &&
            detail::is_digit(static_cast<uint8_t>(text[e + 1]))) {
            ++e;
            while (e < text.size() && detail::is_digit(static_cast<uint8_t>(text[e]))) ++e;
        }
        if (auto v = parse_number(std::string_view(text).substr(i, e - i))) found = v;
        i = e;
    }
    return found;
}

// Text after the last "The answer is" marker, with terminal punctuation
// trimmed; nullopt when the marker never occurs. A final period stays when it
// closes a single-letter abbreviation ("Liverpool F.C.").
inline std::optional<std::string> extract_answer_string(const std::string& text) {
    static const std::string marker = "The answer is";
    size_t pos = text.rfind(marker);
    if (pos == std::string::npos) return std::nullopt;
    std::string tail = trim(text.substr(pos + marker.size()));
    while (!tail.empty() && (tail.back() == '!' || tail.back() == '?')) tail.pop_back();
    if (tail.size() >= 2 && tail.back() == '.') {
        const char prev = tail[tail.size() - 2];
        const bool abbreviation = prev >= 'A' && prev <= 'Z';
        if (!abbreviation) tail.pop_back();
    } else if (tail == ".") {
        tail.clear();
    }
    tail = trim(tail);
    if (tail.empty()) return std::nullopt;
    return tail;
}

enum class NumericMode { Exact2dp, Tolerance };

// Round-half-away-from-zero at two decimals.
inline double round2_away(double v) {
    return std::copysign(std::floor(std::abs(v) * 100.0 + 0.5) / 100.0, v);
}

inline bool score_numeric(double pred, double gold, NumericMode mode) {
    if (mode == NumericMode::Exact2dp) return round2_away(pred) == round2_away(gold);
    if (gold == 0.0) return std::abs(pred) <= 1e-9;
    return std::abs(pred - gold) <= 0.001 * std::abs(gold);
}

inline bool score_kb(const std::string& pred, const std::string& gold) {
    if (pred.empty()) return false;
    return normalize_entity(pred) == normalize_entity(gold);
}

// ---------------------------------------------------------------------------
// Per-record bookkeeping and aggregation.

struct EvalRecord {
    std::string task_id;
    bool correct = false;
    bool answered = false;
    size_t calls_made = 0;
    size_t calls_ok = 0;
    bool first_tool_correct = false;
    std::string predicted;
    std::string gold;

    nlohmann::json to_json() const {
        return {{"task_id", task_id},       {"correct", correct},
                {"answered", answered},     {"calls_made", calls_made},
                {"calls_ok", calls_ok},     {"first_tool_correct", first_tool_correct},
                {"predicted", predicted},   {"gold", gold}};
    }
};

struct PlanRates {
    double grounding = 0.0;
    double executable = 0.0;
    double success = 0.0;
    double success_relaxed = 0.0;
};

inline PlanRates score_plans(const std::vector<PlanOutcome>& outcomes) {
    PlanRates r;
    if (outcomes.empty()) return r;
    for (const auto& o : outcomes) {
        r.grounding += o.grounded;
        r.executable += o.executable;
        r.success += o.success;
        r.success_relaxed += o.success_relaxed;
    }
    const double n = double(outcomes.size());
    r.grounding /= n;
    r.executable /= n;
    r.success /= n;
    r.success_relaxed /= n;
    return r;
}

struct EvalReport {
    std::string dataset;
    size_t n = 0;
    double accuracy = 0.0;
    double tool_selection_accuracy = 0.0;
    double answered_rate = 0.0;
    std::vector<EvalRecord> records;

    nlohmann::json to_json(bool include_records = true) const {
        nlohmann::json doc;
        doc["dataset"] = dataset;
        doc["n"] = n;
        nlohmann::json metrics;
        metrics["accuracy"] = accuracy;
        metrics["tool_selection_accuracy"] = tool_selection_accuracy;
        metrics["answered_rate"] = answered_rate;
        doc["metrics"] = std::move(metrics);
        if (include_records) {
            nlohmann::json recs = nlohmann::json::array();
            for (const auto& r : records) recs.push_back(r.to_json());
            doc["per_record"] = std::move(recs);
        }
        return doc;
    }

    std::string summary_line() const {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "%-16s n=%zu accuracy=%.4f tool_selection=%.4f answered=%.4f",
                      dataset.c_str(), n, accuracy, tool_selection_accuracy, answered_rate);
        return std::string(buf);
    }

    void finalize() {
        n = records.size();
        if (n == 0) return;
        size_t correct = 0, tool_ok = 0, answered = 0;
        for (const auto& r : records) {
            correct += r.correct;
            tool_ok += r.first_tool_correct;
            answered += r.answered;
        }
        accuracy = double(correct) / double(n);
        tool_selection_accuracy = double(tool_ok) / double(n);
        answered_rate = double(answered) / double(n);
    }
};

// Scores one transcript against a numeric gold answer; `gold_tool` (when
// non-empty) grades tool selection by the first recorded call.
inline EvalRecord score_numeric_transcript(const Transcript& t, double gold,
                                           const std::string& gold_tool, NumericMode mode,
                                           const std::string& task_id = {}) {
    EvalRecord rec;
    rec.task_id = task_id;
    rec.gold = render_number(gold);
    auto calls = t.calls();
    rec.calls_made = calls.size();
    for (const auto* c : calls) rec.calls_ok += c->call.status == CallStatus::Ok;
    if (!calls.empty() && !gold_tool.empty())
        rec.first_tool_correct = calls.front()->call.tool == gold_tool;
    if (auto v = extract_last_number(t.final_text)) {
        rec.answered = true;
        rec.predicted = render_number(*v);
        rec.correct = score_numeric(*v, gold, mode);
    }
    return rec;
}

// A KB question only counts as answered when the extracted answer is the
// injected result of an executed call; free-running text after the marker is
// a hallucination, not an answer.
inline EvalRecord score_kb_transcript(const Transcript& t, const std::string& gold,
                                      const std::string& gold_tool,
                                      const std::string& task_id = {}) {
    EvalRecord rec;
    rec.task_id = task_id;
    rec.gold = gold;
    auto calls = t.calls();
    rec.calls_made = calls.size();
    for (const auto* c : calls) rec.calls_ok += c->call.status == CallStatus::Ok;
    if (!calls.empty() && !gold_tool.empty())
        rec.first_tool_correct = calls.front()->call.tool == gold_tool;
    if (auto answer = extract_answer_string(t.final_text)) {
        bool from_tool = false;
        for (const auto* c : calls)
            if (c->call.status == CallStatus::Ok && c->call.result &&
                c->call.result->text == *answer)
                from_tool = true;
        if (from_tool) {
            rec.answered = true;
            rec.predicted = *answer;
            rec.correct = score_kb(*answer, gold);
        }
    }
    return rec;
}

// Injection soundness: every ok call's result string sits at its recorded
// offset of final_text, and re-executing the call reproduces it exactly.
inline bool injection_sound(const Transcript& t, const ToolRegistry& registry) {
    for (const auto* tc : t.calls()) {
        if (tc->call.status != CallStatus::Ok) continue;
        if (!tc->call.result) return false;
        const std::string& r = tc->call.result->text;
        if (t.final_text.compare(tc->result_offset, r.size(), r) != 0) return false;
        ToolResult again = registry.execute(tc->call.tool, tc->call.parsed_args);
        if (again.text != r) return false;
    }
    return true;
}

}  // namespace toolken
