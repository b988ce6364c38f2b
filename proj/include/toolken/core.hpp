#pragma once

// Domain types shared by every module: tool specifications, the toolken
// vocabulary (fused id space on top of a word vocabulary), and tool-call
// records. Tool-call surface syntax is [name](arg1, arg2, ...) with an
// optional trailing =result in demonstration text.

#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"
#include "toolken/common.hpp"

namespace toolken {

enum class ToolKind {
    FunctionWithArgs,
    NoArgAction,
    NoArgObject,
    EndMarker,
};

inline std::string tool_kind_name(ToolKind k) {
    switch (k) {
        case ToolKind::FunctionWithArgs: return "function-with-args";
        case ToolKind::NoArgAction: return "no-arg-action";
        case ToolKind::NoArgObject: return "no-arg-object";
        case ToolKind::EndMarker: return "end-marker";
    }
    throw InternalError("unknown ToolKind");
}

inline ToolKind tool_kind_from_name(const std::string& s) {
    if (s == "function-with-args") return ToolKind::FunctionWithArgs;
    if (s == "no-arg-action") return ToolKind::NoArgAction;
    if (s == "no-arg-object") return ToolKind::NoArgObject;
    if (s == "end-marker") return ToolKind::EndMarker;
    throw DataError("unknown tool kind: " + s);
}

enum class ArgKind { Number, EntityString };

struct ArgSpec {
    std::string name;
    ArgKind kind = ArgKind::Number;
};

struct DemoExample {
    // Full demonstration text containing the call in [tool](args)=result form.
    std::string text;
};

struct ToolSpec {
    std::string name;
    ToolKind kind = ToolKind::FunctionWithArgs;
    std::vector<ArgSpec> arg_schema;
    std::string description;
    std::vector<DemoExample> demonstrations;
};

// Names the decoder understands specially; neither may be registered by users.
inline constexpr const char* kIgnoreSentinelName = "N/A";
inline constexpr const char* kEndMarkerName = "END";

inline bool valid_tool_name(std::string_view name) {
    if (name.empty()) return false;
    for (char c : name) {
        if (is_ascii_space(c)) return false;
        if (c == '[' || c == ']' || c == '(' || c == ')' || c == ',') return false;
    }
    return true;
}

// Fused token id over the union of word vocabulary and toolkens:
// id < base_vocab_size       -> word token
// base <= id < base + tools  -> toolken (base + index in registration order)
using FusedId = uint32_t;

class ToolkenVocab {
public:
    explicit ToolkenVocab(uint32_t base_vocab_size) : base_(base_vocab_size) {}

    uint32_t base_vocab_size() const { return base_; }
    size_t tool_count() const { return tools_.size(); }
    uint32_t fused_size() const { return base_ + static_cast<uint32_t>(tools_.size()); }

    FusedId register_tool(ToolSpec spec) {
        if (frozen_) throw UsageError("vocab is frozen; registration is setup-only");
        if (!valid_tool_name(spec.name))
            throw DataError("invalid tool name: '" + spec.name + "'");
        if (spec.name == kIgnoreSentinelName || spec.name == kEndMarkerName)
            throw DataError("reserved tool name: " + spec.name);
        if (index_.count(spec.name))
            throw DataError("duplicate tool name: " + spec.name);
        if (spec.kind == ToolKind::FunctionWithArgs && spec.arg_schema.empty())
            throw DataError("function tool needs a non-empty arg schema: " + spec.name);
        if (spec.kind != ToolKind::FunctionWithArgs && !spec.arg_schema.empty())
            throw DataError("no-arg tool must have an empty arg schema: " + spec.name);
        return append(std::move(spec));
    }

    // Plan-mode terminator, registered by the engine itself.
    FusedId register_end_marker() {
        if (frozen_) throw UsageError("vocab is frozen; registration is setup-only");
        if (index_.count(kEndMarkerName)) return fused_id_of(kEndMarkerName);
        ToolSpec spec;
        spec.name = kEndMarkerName;
        spec.kind = ToolKind::EndMarker;
        spec.description = "end of plan";
        return append(std::move(spec));
    }

    // Registration happens during single-threaded setup; a frozen vocab is
    // immutable and safely shareable across threads.
    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }

    bool is_word(FusedId id) const { return id < base_; }
    bool is_toolken(FusedId id) const { return id >= base_ && id < fused_size(); }

    const ToolSpec& tool_at(size_t index) const {
        if (index >= tools_.size()) throw InternalError("tool index out of range");
        return tools_[index];
    }

    const ToolSpec& tool_for(FusedId id) const {
        if (!is_toolken(id)) throw DataError("fused id is not a toolken: " + std::to_string(id));
        return tools_[id - base_];
    }

    // Exact partition of the fused space; out-of-range ids are an error.
    enum class TokenClass { Word, Toolken };
    TokenClass classify(FusedId id) const {
        if (id < base_) return TokenClass::Word;
        if (id < fused_size()) return TokenClass::Toolken;
        throw DataError("fused id out of range: " + std::to_string(id));
    }

    std::optional<FusedId> lookup(std::string_view name) const {
        auto it = index_.find(std::string(name));
        if (it == index_.end()) return std::nullopt;
        return base_ + it->second;
    }

    FusedId fused_id_of(std::string_view name) const {
        auto id = lookup(name);
        if (!id) throw DataError("unknown tool name: " + std::string(name));
        return *id;
    }

    const std::vector<ToolSpec>& tools() const { return tools_; }

    std::vector<ToolSpec>& mutable_tools() {
        if (frozen_) throw UsageError("vocab is frozen");
        return tools_;
    }

    nlohmann::json to_json() const {
        nlohmann::json doc;
        doc["base_vocab_size"] = base_;
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& t : tools_) {
            nlohmann::json jt;
            jt["name"] = t.name;
            jt["kind"] = tool_kind_name(t.kind);
            nlohmann::json schema = nlohmann::json::array();
            for (const auto& a : t.arg_schema)
                schema.push_back({a.name, a.kind == ArgKind::Number ? "number" : "entity-string"});
            jt["arg_schema"] = schema;
            jt["description"] = t.description;
            if (!t.demonstrations.empty()) {
                nlohmann::json demos = nlohmann::json::array();
                for (const auto& d : t.demonstrations) demos.push_back(d.text);
                jt["demonstrations"] = demos;
            }
            arr.push_back(std::move(jt));
        }
        doc["tools"] = std::move(arr);
        return doc;
    }

    static ToolkenVocab from_json(const nlohmann::json& doc) {
        if (!doc.contains("base_vocab_size") || !doc.contains("tools"))
            throw DataError("vocab json: missing base_vocab_size or tools");
        ToolkenVocab vocab(doc.at("base_vocab_size").get<uint32_t>());
        for (const auto& jt : doc.at("tools")) {
            ToolSpec spec;
            spec.name = jt.at("name").get<std::string>();
            spec.kind = tool_kind_from_name(jt.at("kind").get<std::string>());
            for (const auto& ja : jt.at("arg_schema")) {
                ArgSpec a;
                a.name = ja.at(0).get<std::string>();
                std::string k = ja.at(1).get<std::string>();
                if (k == "number") a.kind = ArgKind::Number;
                else if (k == "entity-string") a.kind = ArgKind::EntityString;
                else throw DataError("vocab json: unknown arg kind " + k);
                spec.arg_schema.push_back(std::move(a));
            }
            spec.description = jt.value("description", std::string());
            if (jt.contains("demonstrations"))
                for (const auto& jd : jt.at("demonstrations"))
                    spec.demonstrations.push_back({jd.get<std::string>()});
            if (spec.kind == ToolKind::EndMarker) {
                vocab.register_end_marker();
            } else {
                vocab.register_tool(std::move(spec));
            }
        }
        return vocab;
    }

    std::string serialize() const { return to_json().dump(2) + "\n"; }

    static ToolkenVocab deserialize(const std::string& text) {
        nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
        if (doc.is_discarded()) throw DataError("vocab json: parse error");
        return from_json(doc);
    }

private:
    FusedId append(ToolSpec spec) {
        const uint32_t idx = static_cast<uint32_t>(tools_.size());
        index_.emplace(spec.name, idx);
        tools_.push_back(std::move(spec));
        return base_ + idx;
    }

    uint32_t base_;
    std::vector<ToolSpec> tools_;
    std::unordered_map<std::string, uint32_t> index_;
    bool frozen_ = false;
};

// ---------------------------------------------------------------------------
// Tool execution records.

struct ToolResult {
    std::string text;                  // injected form
    std::optional<double> value;       // present for numeric tools
};

using ArgValue = std::variant<double, std::string>;

enum class CallStatus { Ok, ParseError, ExecError };

inline std::string call_status_name(CallStatus s) {
    switch (s) {
        case CallStatus::Ok: return "ok";
        case CallStatus::ParseError: return "parse-error";
        case CallStatus::ExecError: return "exec-error";
    }
    throw InternalError("unknown CallStatus");
}

struct ToolCall {
    std::string tool;
    std::string raw_args;
    std::vector<ArgValue> parsed_args;     // empty on parse-error
    std::optional<ToolResult> result;      // present iff status == Ok
    CallStatus status = CallStatus::Ok;
    std::string error;                     // diagnostic for non-ok status
};

// Executor bindings live beside the vocab; specs themselves stay serializable.
using ToolExecutor = std::function<ToolResult(const std::vector<ArgValue>&)>;

class ToolRegistry {
public:
    explicit ToolRegistry(ToolkenVocab vocab) : vocab_(std::move(vocab)) {}

    const ToolkenVocab& vocab() const { return vocab_; }
    ToolkenVocab& vocab() { return vocab_; }

    void bind(const std::string& name, ToolExecutor fn) {
        if (!vocab_.lookup(name)) throw DataError("bind: unknown tool " + name);
        executors_[name] = std::move(fn);
    }

    bool has_executor(const std::string& name) const { return executors_.count(name) > 0; }

    ToolResult execute(const std::string& name, const std::vector<ArgValue>& args) const {
        auto it = executors_.find(name);
        if (it == executors_.end()) throw DataError("no executor bound for tool " + name);
        return it->second(args);
    }

private:
    ToolkenVocab vocab_;
    std::unordered_map<std::string, ToolExecutor> executors_;
};

}  // namespace toolken
