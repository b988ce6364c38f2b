#pragma once

// Frozen language-model backends. The engine never needs gradients from a
// backend: it consumes per-position hidden states h (dimension d) and word
// logits equal to W_nu * h for the model's own head.
//
// ToyLM is the built-in desk-scale stand-in for a real LLM. It combines
//   * a byte + word-piece tokenizer (|V| <= 512),
//   * a linear recurrent feature layer (decayed bag of token embeddings),
//   * a hard-attention pattern layer that proposes the next token by bounded
//     suffix matching and by copying call arguments out of the current
//     question, standing in for the in-context pattern completion a large
//     model performs in tool mode,
// and exposes everything through an honest linear head: the hidden state is
// [features; code(proposed token)] and word logits are exactly W_nu * h.
// All parameters are generated deterministically from a seed and frozen.

#include <deque>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "toolken/common.hpp"

namespace toolken {

using HiddenState = std::vector<float>;
using WordLogits = std::vector<float>;

struct StepOutput {
    HiddenState hidden;
    WordLogits word_logits;
};

// Incremental decode state over one context. Sessions are single-owner;
// backends themselves are read-only after construction and shareable.
class LMSession {
public:
    virtual ~LMSession() = default;
    virtual void append(uint32_t token_id) = 0;
    virtual size_t length() const = 0;
    virtual HiddenState current_hidden() const = 0;
    virtual WordLogits current_word_logits() const = 0;
};

class LMBackend {
public:
    virtual ~LMBackend() = default;

    virtual uint32_t vocab_size() const = 0;
    virtual uint32_t hidden_dim() const = 0;
    virtual uint32_t eos_id() const = 0;
    virtual Fingerprint fingerprint() const = 0;

    virtual std::vector<uint32_t> tokenize(std::string_view text) const = 0;
    virtual std::string detokenize(std::span<const uint32_t> ids) const = 0;

    virtual std::unique_ptr<LMSession> start_session() const = 0;

    // Word logits as a pure function of a hidden state (the model's own head
    // applied to h). This is what lets training epochs run backbone-free from
    // a harvested dump.
    virtual WordLogits head_logits(const HiddenState& h) const = 0;

    // Per-position outputs for a whole sequence. Position i depends only on
    // ids[0..i].
    virtual std::vector<StepOutput> forward(std::span<const uint32_t> ids) const {
        if (ids.empty()) throw DataError("forward: empty sequence");
        auto session = start_session();
        std::vector<StepOutput> out;
        out.reserve(ids.size());
        for (uint32_t id : ids) {
            session->append(id);
            out.push_back({session->current_hidden(), session->current_word_logits()});
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Tokenizer: EOS = 0, raw bytes at 1..256, word pieces above. Pieces match
// greedily (longest first) on word boundaries; digits outside explicit pieces
// always tokenize byte-by-byte.

namespace detail {

inline const std::vector<std::string>& builtin_pieces() {
    static const std::vector<std::string> pieces = {
        // scaffolding
        "Question", "Answer", "The", "What", "Who", "Which", "Where", "When",
        "How", "If", "Goal", "Instruction", "Environment", "Plan", "Objects", "I",
        // general
        "the", "a", "an", "is", "are", "of", "and", "to", "in", "on", "at",
        "for", "from", "it", "you", "what", "who", "which", "do", "can",
        "would", "want", "just", "there", "out", "up", "down", "over", "go",
        "get", "take", "some", "while", "am",
        // arithmetic templates
        "sum", "difference", "product", "quotient", "plus", "minus", "times",
        "divided", "divide", "add", "subtract", "multiply", "remainder",
        "power", "raised", "root", "square", "logarithm", "log", "natural",
        "base", "ten", "least", "common", "multiple", "greatest", "divisor",
        "many", "ways", "choose", "pick", "arrangements", "items", "total",
        "answer",
        // kb templates
        "winner", "capital", "city", "country", "author", "director",
        "president", "head", "leader", "member", "club", "part", "located",
        "location", "born", "birth", "place", "language", "official",
        "currency", "population", "area", "founder", "owner", "parent",
        "child", "spouse", "employer", "company", "university", "genre",
        "color", "creator", "developer", "publisher", "origin", "nationality",
        "religion", "position", "award", "record", "holder", "championship",
        "season", "event", "sport", "player", "coach", "title", "name",
        "team",
        // kb subject filler
        "river", "stone", "maple", "harbor", "summit", "meadow", "cedar",
        "falcon", "ember", "willow", "granite", "orchid", "harvest", "lantern",
        // mini-home objects and rooms
        "chair", "stool", "couch", "bed", "desk", "novel", "mail",
        "television", "computer", "phone", "glass", "mug", "fridge",
        "cabinet", "drawer", "lamp", "remote", "keyboard", "apple", "water",
        "pillow", "blanket", "window", "door", "plant", "mirror",
        "toothbrush", "food", "home", "office", "kitchen", "bedroom",
        "living", "room",
        // mini-home instructions
        "find", "open", "read", "reading", "book", "sit", "sitting", "grab",
        "lie", "sleep", "watch", "turn", "light", "switch", "stand", "put",
        "back", "touch", "look", "walk", "type", "drink", "eat", "wake",
        "work", "rest", "relax", "lying", "start", "seat",
    };
    return pieces;
}

inline bool is_alpha(uint8_t c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
inline bool is_digit(uint8_t c) { return c >= '0' && c <= '9'; }

}  // namespace detail

class ToyTokenizer {
public:
    static constexpr uint32_t kEos = 0;
    static constexpr uint32_t kByteBase = 1;   // byte b -> id 1 + b
    static constexpr uint32_t kPieceBase = 257;

    explicit ToyTokenizer(std::vector<std::string> extra_pieces = {}) {
        pieces_ = detail::builtin_pieces();
        for (auto& p : extra_pieces) {
            if (p.empty()) throw UsageError("empty tokenizer piece");
            pieces_.push_back(std::move(p));
        }
        if (vocab_size() > 512)
            throw UsageError("tokenizer vocabulary exceeds 512 ids");
        for (uint32_t i = 0; i < pieces_.size(); ++i) {
            by_first_[static_cast<uint8_t>(pieces_[i][0])].push_back(i);
        }
        for (auto& [c, v] : by_first_) {
            std::sort(v.begin(), v.end(), [&](uint32_t a, uint32_t b) {
                if (pieces_[a].size() != pieces_[b].size())
                    return pieces_[a].size() > pieces_[b].size();
                return a < b;
            });
        }
    }

    uint32_t vocab_size() const { return kPieceBase + static_cast<uint32_t>(pieces_.size()); }

    const std::string& piece_text(uint32_t piece_index) const { return pieces_[piece_index]; }

    // Token text; EOS renders as empty.
    std::string token_text(uint32_t id) const {
        if (id == kEos) return "";
        if (id >= kByteBase && id < kPieceBase) return std::string(1, char(id - kByteBase));
        if (id < vocab_size()) return pieces_[id - kPieceBase];
        throw DataError("unknown token id: " + std::to_string(id));
    }

    std::vector<uint32_t> tokenize(std::string_view text) const {
        std::vector<uint32_t> ids;
        std::vector<uint32_t> offsets;
        tokenize_impl(text, ids, &offsets);
        return ids;
    }

    // Byte offset of each token's first byte; offsets.back() + len(last) = size.
    void tokenize_with_offsets(std::string_view text, std::vector<uint32_t>& ids,
                               std::vector<uint32_t>& offsets) const {
        tokenize_impl(text, ids, &offsets);
    }

    std::string detokenize(std::span<const uint32_t> ids) const {
        std::string out;
        for (uint32_t id : ids) out += token_text(id);
        return out;
    }

    void hash_into(Sha256& h) const {
        h.update_u32(static_cast<uint32_t>(pieces_.size()));
        for (const auto& p : pieces_) h.update(p.data(), p.size());
    }

private:
    void tokenize_impl(std::string_view text, std::vector<uint32_t>& ids,
                       std::vector<uint32_t>* offsets) const {
        ids.clear();
        if (offsets) offsets->clear();
        size_t pos = 0;
        const size_t n = text.size();
        while (pos < n) {
            uint32_t id = kByteBase + static_cast<uint8_t>(text[pos]);
            size_t len = 1;
            auto it = by_first_.find(static_cast<uint8_t>(text[pos]));
            if (it != by_first_.end()) {
                for (uint32_t pi : it->second) {
                    const std::string& p = pieces_[pi];
                    if (p.size() > n - pos) continue;
                    if (text.substr(pos, p.size()) != p) continue;
                    if (!boundary_ok(text, pos, p)) continue;
                    id = kPieceBase + pi;
                    len = p.size();
                    break;
                }
            }
            ids.push_back(id);
            if (offsets) offsets->push_back(static_cast<uint32_t>(pos));
            pos += len;
        }
    }

    static bool boundary_ok(std::string_view text, size_t pos, const std::string& piece) {
        const bool alpha_piece = detail::is_alpha(static_cast<uint8_t>(piece.front()));
        auto same_class = [&](uint8_t c) {
            return alpha_piece ? detail::is_alpha(c) : detail::is_digit(c);
        };
        if (pos > 0 && same_class(static_cast<uint8_t>(text[pos - 1]))) return false;
        size_t end = pos + piece.size();
        if (end < text.size() && same_class(static_cast<uint8_t>(text[end]))) return false;
        return true;
    }

    std::vector<std::string> pieces_;
    std::unordered_map<uint8_t, std::vector<uint32_t>> by_first_;
};

// ---------------------------------------------------------------------------
// ToyLM.

struct ToyConfig {
    uint64_t seed = 7;
    uint32_t feature_dim = 80;    // tanh feature block of h
    uint32_t code_dim = 48;       // proposed-token code block of h
    uint32_t state_dim = 192;     // internal recurrent state (not exposed)
    float gamma = 0.97f;          // recurrent decay
    float code_gain = 6.0f;      // head weight on the code block
    float head_noise = 0.08f;     // per-entry scale of the contextual head block
    uint32_t max_context = 32768;
    std::vector<std::string> extra_pieces;  // appended to the built-in inventory
};

class ToyLM final : public LMBackend {
public:
    explicit ToyLM(ToyConfig cfg = {})
        : cfg_(cfg), tokenizer_(cfg.extra_pieces) {
        if (cfg_.feature_dim + cfg_.code_dim < 32 || cfg_.feature_dim + cfg_.code_dim > 128)
            throw UsageError("ToyLM hidden dim must stay within [32, 128]");
        init_params();
        fingerprint_ = compute_fingerprint();
    }

    uint32_t vocab_size() const override { return tokenizer_.vocab_size(); }
    uint32_t hidden_dim() const override { return cfg_.feature_dim + cfg_.code_dim; }
    uint32_t eos_id() const override { return ToyTokenizer::kEos; }
    Fingerprint fingerprint() const override { return fingerprint_; }
    const ToyTokenizer& toy_tokenizer() const { return tokenizer_; }
    const ToyConfig& config() const { return cfg_; }

    std::vector<uint32_t> tokenize(std::string_view text) const override {
        return tokenizer_.tokenize(text);
    }

    std::string detokenize(std::span<const uint32_t> ids) const override {
        return tokenizer_.detokenize(ids);
    }

    WordLogits head_logits(const HiddenState& h) const override {
        if (h.size() != hidden_dim()) throw DataError("head_logits: wrong hidden dim");
        const uint32_t V = vocab_size();
        const uint32_t df = cfg_.feature_dim;
        const uint32_t dc = cfg_.code_dim;
        WordLogits logits(V);
        for (uint32_t w = 0; w < V; ++w) {
            const float* arow = &head_ctx_[size_t(w) * df];
            float acc = 0.f;
            for (uint32_t k = 0; k < df; ++k) acc += arow[k] * h[k];
            const float* crow = &codes_[size_t(w) * dc];
            float cacc = 0.f;
            for (uint32_t k = 0; k < dc; ++k) cacc += crow[k] * h[df + k];
            logits[w] = acc + cfg_.code_gain * cacc;
        }
        return logits;
    }

    std::unique_ptr<LMSession> start_session() const override;

    // Sanity hash over every parameter tensor; equal seeds give equal hashes.
    Fingerprint compute_fingerprint() const {
        Sha256 h;
        h.update("TOYLMv1", 7);
        h.update_u32(static_cast<uint32_t>(cfg_.seed));
        h.update_u32(static_cast<uint32_t>(cfg_.seed >> 32));
        h.update_u32(cfg_.feature_dim);
        h.update_u32(cfg_.code_dim);
        h.update_u32(cfg_.state_dim);
        h.update_f32(&cfg_.gamma, 1);
        h.update_f32(&cfg_.code_gain, 1);
        h.update_f32(&cfg_.head_noise, 1);
        tokenizer_.hash_into(h);
        h.update_f32(embed_.data(), embed_.size());
        h.update_f32(feat_proj_.data(), feat_proj_.size());
        h.update_f32(head_ctx_.data(), head_ctx_.size());
        h.update_f32(codes_.data(), codes_.size());
        return h.digest();
    }

private:
    friend class ToySession;

    void init_params() {
        Rng rng(cfg_.seed ^ 0x746f796c6d756c74ULL);
        const uint32_t V = vocab_size();
        const uint32_t Dm = cfg_.state_dim;
        const uint32_t df = cfg_.feature_dim;
        const uint32_t dc = cfg_.code_dim;

        embed_.resize(size_t(V) * Dm);
        const float es = 1.0f / std::sqrt(float(Dm));
        for (auto& v : embed_) v = float(rng.gaussian()) * es;

        feat_proj_.resize(size_t(df) * Dm);
        // Keeps pre-tanh activations near unit scale for typical contexts
        // (decayed state norm ~ 1/sqrt(1 - gamma^2)).
        const float steady = 1.0f / std::sqrt(1.0f - cfg_.gamma * cfg_.gamma);
        const float proj_scale = 0.9f / (steady * std::sqrt(float(Dm)));
        for (auto& v : feat_proj_) v = float(rng.gaussian()) * proj_scale;

        head_ctx_.resize(size_t(V) * df);
        for (auto& v : head_ctx_) v = float(rng.gaussian()) * (cfg_.head_noise / std::sqrt(float(df)));

        codes_.resize(size_t(V) * dc);
        for (uint32_t w = 0; w < V; ++w) {
            float norm2 = 0.f;
            for (uint32_t k = 0; k < dc; ++k) {
                float g = float(rng.gaussian());
                codes_[size_t(w) * dc + k] = g;
                norm2 += g * g;
            }
            const float inv = 1.0f / std::sqrt(std::max(norm2, 1e-12f));
            for (uint32_t k = 0; k < dc; ++k) codes_[size_t(w) * dc + k] *= inv;
        }
    }

    ToyConfig cfg_;
    ToyTokenizer tokenizer_;
    std::vector<float> embed_;      // V x state_dim token embeddings
    std::vector<float> feat_proj_;  // feature_dim x state_dim
    std::vector<float> head_ctx_;   // V x feature_dim contextual head block
    std::vector<float> codes_;      // V x code_dim unit code rows
    Fingerprint fingerprint_{};
};

// Pattern-layer scan bounds (bytes).
namespace detail {
constexpr size_t kSuffixWindow = 24;
constexpr size_t kScanWindow = 8192;
constexpr const char* kQuestionMarker = "Question:";
}  // namespace detail

class ToySession final : public LMSession {
public:
    explicit ToySession(const ToyLM& lm)
        : lm_(lm), state_(lm.cfg_.state_dim, 0.0f) {
        intended_ = ToyTokenizer::kEos;
    }

    void append(uint32_t token_id) override {
        if (token_id >= lm_.vocab_size())
            throw DataError("unknown token id: " + std::to_string(token_id));
        if (ids_.size() >= lm_.cfg_.max_context)
            throw DataError("context-length exceeded");
        ids_.push_back(token_id);

        // recurrent feature state
        const uint32_t Dm = lm_.cfg_.state_dim;
        const float* col = &lm_.embed_[size_t(token_id) * Dm];
        const float g = lm_.cfg_.gamma;
        for (uint32_t k = 0; k < Dm; ++k) state_[k] = g * state_[k] + col[k];

        // context bytes + per-byte token-start map
        const std::string piece = lm_.tokenizer_.token_text(token_id);
        if (!piece.empty()) {
            tok_begin_.resize(text_.size() + piece.size(), false);
            tok_begin_[text_.size()] = true;
            text_ += piece;
            index_new_windows(piece.size());
        }

        advance_pattern_layer(token_id);
    }

    size_t length() const override { return ids_.size(); }

    HiddenState current_hidden() const override {
        const uint32_t df = lm_.cfg_.feature_dim;
        const uint32_t dc = lm_.cfg_.code_dim;
        const uint32_t Dm = lm_.cfg_.state_dim;
        HiddenState h(df + dc);
        for (uint32_t r = 0; r < df; ++r) {
            const float* row = &lm_.feat_proj_[size_t(r) * Dm];
            float acc = 0.f;
            for (uint32_t k = 0; k < Dm; ++k) acc += row[k] * state_[k];
            h[r] = std::tanh(acc);
        }
        const float* code = &lm_.codes_[size_t(intended_) * dc];
        for (uint32_t k = 0; k < dc; ++k) h[df + k] = code[k];
        return h;
    }

    WordLogits current_word_logits() const override {
        return lm_.head_logits(current_hidden());
    }

    const std::string& context_text() const { return text_; }

private:
    // --- pattern layer -----------------------------------------------------

    void advance_pattern_layer(uint32_t token_id) {
        if (!copy_queue_.empty()) {
            if (copy_queue_.front() == token_id) {
                copy_queue_.pop_front();
            } else {
                copy_queue_.clear();  // divergence aborts the copy
            }
        }

        if (ends_with(text_, "](")) start_argument_copy();

        if (!copy_queue_.empty()) {
            intended_ = copy_queue_.front();
            return;
        }
        intended_ = suffix_continuation();
    }

    // Most recent earlier occurrence of the trailing 4-gram; proposes the
    // token that followed it. The index records the prior occurrence before
    // the trailing window overwrites it.
    uint32_t suffix_continuation() const {
        if (text_.size() < 4) return ToyTokenizer::kEos;
        const size_t w = text_.size() - 4;
        const size_t q = last_window_prev_;
        if (q == SIZE_MAX || q >= w) return ToyTokenizer::kEos;
        if (text_.compare(q, 4, text_, w, 4) != 0) return ToyTokenizer::kEos;
        const size_t follow = q + 4;
        if (follow >= text_.size()) return ToyTokenizer::kEos;
        if (!tok_begin_[follow]) return ToyTokenizer::kEos;
        return token_starting_at(follow);
    }

    uint32_t token_starting_at(size_t byte_pos) const {
        // Re-derive the token that begins at byte_pos from the byte map.
        size_t end = byte_pos + 1;
        while (end < text_.size() && !tok_begin_[end]) ++end;
        std::string_view piece(text_.data() + byte_pos, end - byte_pos);
        if (piece.size() == 1) {
            // byte id; single-char pieces render identically so the proposal
            // stays byte-consistent either way
            return ToyTokenizer::kByteBase + static_cast<uint8_t>(piece[0]);
        }
        auto ids = lm_.tokenizer_.tokenize(std::string(piece));
        return ids.empty() ? ToyTokenizer::kEos : ids.front();
    }

    uint64_t window_key(size_t pos) const {
        uint64_t k = 0;
        for (int i = 0; i < 4; ++i) k = (k << 8) | static_cast<uint8_t>(text_[pos + i]);
        return k;
    }

    void index_new_windows(size_t appended) {
        if (text_.size() < 4) return;
        size_t first = text_.size() >= appended + 3 ? text_.size() - appended - 3 : 0;
        size_t last = text_.size() - 4;
        if (first > last) return;
        for (size_t p = first; p <= last; ++p) {
            uint64_t key = window_key(p);
            if (p == last) {
                auto it = fourgram_prev_.find(key);
                last_window_prev_ = (it != fourgram_prev_.end()) ? it->second : SIZE_MAX;
            }
            fourgram_prev_[key] = p;
        }
    }

    // --- argument copy -----------------------------------------------------

    void start_argument_copy() {
        copy_queue_.clear();
        const size_t call_bracket = text_.size() - 2;  // position of ']'
        const size_t floor = text_.size() > detail::kScanWindow
                                 ? text_.size() - detail::kScanWindow
                                 : 0;

        // previous complete [..](..) group decides numeric vs entity copying
        std::optional<std::string> prev_args = previous_group_args(call_bracket, floor);
        if (!prev_args) return;

        bool numeric = !prev_args->empty();
        if (numeric) {
            bool has_digit = false;
            for (char c : *prev_args) {
                if (detail::is_digit(static_cast<uint8_t>(c))) has_digit = true;
                else if (!(c == ' ' || c == '.' || c == ',' || c == '+' || c == '-' ||
                           c == 'e' || c == 'E')) {
                    numeric = false;
                    break;
                }
            }
            numeric = numeric && has_digit;
        }

        std::string args_text;
        if (numeric) {
            // the demonstration's arity bounds how many operands to copy
            size_t demo_arity = 1;
            for (char c : *prev_args) demo_arity += c == ',';
            args_text = numeric_args(call_bracket, floor, demo_arity);
        }
        if (args_text.empty()) args_text = alignment_args(call_bracket, floor);
        if (args_text.empty()) return;

        auto ids = lm_.tokenizer_.tokenize(args_text + ")");
        copy_queue_.assign(ids.begin(), ids.end());
    }

    std::optional<std::string> previous_group_args(size_t before, size_t floor) const {
        if (before < 2) return std::nullopt;
        for (size_t p = before - 1; p > floor + 1; --p) {
            if (text_[p] == '(' && text_[p - 1] == ']') {
                size_t close = text_.find(')', p + 1);
                if (close == std::string::npos || close >= before) return std::nullopt;
                return text_.substr(p + 1, close - p - 1);
            }
        }
        return std::nullopt;
    }

    size_t current_question_start(size_t before, size_t floor) const {
        size_t q = text_.rfind(detail::kQuestionMarker, before);
        if (q != std::string::npos && q >= floor) return q;
        size_t nl = text_.rfind('\n', before);
        if (nl != std::string::npos && nl >= floor) return nl + 1;
        return floor;
    }

    // The first max_args operands mentioned in the current question, in
    // order, comma-joined.
    std::string numeric_args(size_t call_bracket, size_t floor, size_t max_args) const {
        size_t open_bracket = text_.rfind('[', call_bracket);
        if (open_bracket == std::string::npos) return {};
        const size_t qstart = current_question_start(open_bracket, floor);
        std::vector<std::string> nums;
        size_t p = qstart;
        while (p < open_bracket && nums.size() < max_args) {
            if (detail::is_digit(static_cast<uint8_t>(text_[p]))) {
                size_t e = p;
                while (e < open_bracket && detail::is_digit(static_cast<uint8_t>(text_[e]))) ++e;
                if (e < open_bracket && text_[e] == '.' && e + 1 < open_bracket &&
                    detail::is_digit(static_cast<uint8_t>(text_[e + 1]))) {
                    ++e;
                    while (e < open_bracket && detail::is_digit(static_cast<uint8_t>(text_[e]))) ++e;
                }
                nums.emplace_back(text_.substr(p, e - p));
                p = e;
            } else {
                ++p;
            }
        }
        if (nums.empty()) return {};
        std::string out;
        for (size_t i = 0; i < nums.size(); ++i) {
            if (i) out += ", ";
            out += nums[i];
        }
        return out;
    }

    // Entity argument: the slot of the current question, located by aligning
    // it against the earlier demonstration questions. With two or more
    // demonstrations the shared template affixes bound the alignment, so a
    // subject that happens to share words with the template tail still comes
    // out whole.
    std::string alignment_args(size_t call_bracket, size_t floor) const {
        size_t open_bracket = text_.rfind('[', call_bracket);
        if (open_bracket == std::string::npos) return {};
        size_t marker = text_.rfind(detail::kQuestionMarker, open_bracket);
        if (marker == std::string::npos || marker < floor) return {};
        size_t qbeg = marker + std::strlen(detail::kQuestionMarker);
        while (qbeg < open_bracket && text_[qbeg] == ' ') ++qbeg;
        size_t qend = text_.find('?', qbeg);
        if (qend == std::string::npos || qend > open_bracket) return {};
        std::string_view qc(text_.data() + qbeg, qend - qbeg);

        auto lcp_of = [](std::string_view a, std::string_view b) {
            size_t n = 0;
            while (n < a.size() && n < b.size() && a[n] == b[n]) ++n;
            return n;
        };
        auto lcs_of = [](std::string_view a, std::string_view b) {
            size_t n = 0;
            while (n < a.size() && n < b.size() && a[a.size() - 1 - n] == b[b.size() - 1 - n])
                ++n;
            return n;
        };

        std::vector<std::string_view> demos;
        size_t search_end = marker;
        while (search_end > floor) {
            size_t m = text_.rfind(detail::kQuestionMarker, search_end - 1);
            if (m == std::string::npos || m < floor) break;
            size_t db = m + std::strlen(detail::kQuestionMarker);
            while (db < search_end && text_[db] == ' ') ++db;
            size_t de = text_.find('?', db);
            if (de != std::string::npos && de < search_end)
                demos.emplace_back(text_.data() + db, de - db);
            search_end = m;
        }
        if (demos.empty()) return {};

        // template affixes = what the demonstrations agree on among themselves
        size_t head_cap = std::string::npos, tail_cap = std::string::npos;
        if (demos.size() >= 2) {
            head_cap = demos[0].size();
            tail_cap = demos[0].size();
            for (size_t i = 1; i < demos.size(); ++i) {
                head_cap = std::min(head_cap, lcp_of(demos[0], demos[i]));
                tail_cap = std::min(tail_cap, lcs_of(demos[0], demos[i]));
            }
        }

        std::string best;
        size_t best_score = 0;
        for (const auto& qd : demos) {
            size_t lcp = std::min(lcp_of(qc, qd), head_cap);
            size_t lcs = std::min(lcs_of(qc, qd), tail_cap);
            if (lcp + lcs >= qc.size()) continue;
            if (lcp + lcs > best_score || best.empty()) {
                best_score = lcp + lcs;
                best = std::string(qc.substr(lcp, qc.size() - lcp - lcs));
            }
        }
        return trim(best);
    }

    const ToyLM& lm_;
    std::vector<uint32_t> ids_;
    std::vector<float> state_;
    std::string text_;
    std::vector<bool> tok_begin_;
    std::unordered_map<uint64_t, size_t> fourgram_prev_;
    size_t last_window_prev_ = SIZE_MAX;
    std::deque<uint32_t> copy_queue_;
    uint32_t intended_ = 0;
};

inline std::unique_ptr<LMSession> ToyLM::start_session() const {
    return std::make_unique<ToySession>(*this);
}

// ---------------------------------------------------------------------------
// ScriptedLM: table-driven backend for decoder tests. Every context prefix
// queried must be scripted; a miss is an error, never a silent default.

class ScriptedLM final : public LMBackend {
public:
    ScriptedLM(uint32_t vocab_size, uint32_t hidden_dim, uint32_t eos = 0)
        : vocab_size_(vocab_size), hidden_dim_(hidden_dim), eos_(eos) {
        Sha256 h;
        h.update("SCRIPTED", 8);
        h.update_u32(vocab_size_);
        h.update_u32(hidden_dim_);
        fingerprint_ = h.digest();
    }

    void script(std::vector<uint32_t> context, HiddenState h, WordLogits logits) {
        if (h.size() != hidden_dim_) throw UsageError("scripted hidden has wrong dim");
        if (logits.size() != vocab_size_) throw UsageError("scripted logits have wrong size");
        head_table_[hidden_key(h)] = logits;
        table_[std::move(context)] = {std::move(h), std::move(logits)};
    }

    uint32_t vocab_size() const override { return vocab_size_; }
    uint32_t hidden_dim() const override { return hidden_dim_; }
    uint32_t eos_id() const override { return eos_; }
    Fingerprint fingerprint() const override { return fingerprint_; }

    std::vector<uint32_t> tokenize(std::string_view text) const override {
        std::vector<uint32_t> ids;
        ids.reserve(text.size());
        for (char c : text) {
            uint32_t id = static_cast<uint8_t>(c);
            if (id >= vocab_size_) throw DataError("byte outside scripted vocab");
            ids.push_back(id);
        }
        return ids;
    }

    std::string detokenize(std::span<const uint32_t> ids) const override {
        std::string out;
        for (uint32_t id : ids)
            if (id < 256 && id != eos_) out.push_back(char(id));
        return out;
    }

    WordLogits head_logits(const HiddenState& h) const override {
        auto it = head_table_.find(hidden_key(h));
        if (it == head_table_.end()) throw DataError("scripted head: unknown hidden state");
        return it->second;
    }

    std::unique_ptr<LMSession> start_session() const override {
        return std::make_unique<Session>(*this);
    }

private:
    struct VecHash {
        size_t operator()(const std::vector<uint32_t>& v) const {
            uint64_t h = 1469598103934665603ull;
            for (uint32_t x : v) {
                h ^= x;
                h *= 1099511628211ull;
            }
            return static_cast<size_t>(h);
        }
    };

    static std::string hidden_key(const HiddenState& h) {
        return std::string(reinterpret_cast<const char*>(h.data()),
                           h.size() * sizeof(float));
    }

    const StepOutput& lookup(const std::vector<uint32_t>& ctx) const {
        auto it = table_.find(ctx);
        if (it == table_.end()) {
            std::string ctx_str;
            for (uint32_t id : ctx) ctx_str += std::to_string(id) + " ";
            throw DataError("scripted lookup miss for context [" + ctx_str + "]");
        }
        return it->second;
    }

    class Session final : public LMSession {
    public:
        explicit Session(const ScriptedLM& lm) : lm_(lm) {}
        void append(uint32_t id) override {
            if (id >= lm_.vocab_size_) throw DataError("unknown token id");
            ids_.push_back(id);
        }
        size_t length() const override { return ids_.size(); }
        HiddenState current_hidden() const override { return lm_.lookup(ids_).hidden; }
        WordLogits current_word_logits() const override { return lm_.lookup(ids_).word_logits; }

    private:
        const ScriptedLM& lm_;
        std::vector<uint32_t> ids_;
    };

    uint32_t vocab_size_;
    uint32_t hidden_dim_;
    uint32_t eos_;
    Fingerprint fingerprint_{};
    std::unordered_map<std::vector<uint32_t>, StepOutput, VecHash> table_;
    std::unordered_map<std::string, WordLogits> head_table_;
};

}  // namespace toolken
