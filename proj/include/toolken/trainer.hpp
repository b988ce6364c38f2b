#pragma once

// Toolken-embedding training: fit the |T| x d matrix W_tau against harvested
// hidden states by minimizing masked cross-entropy over the fused vocabulary.
// Only W_tau ever receives gradient; the backbone stays frozen, so per-epoch
// work is independent of the backbone and word-logit terms are cached once.
//
// Checkpoint format (binary, little-endian): magic "TKEN", version u32, d u32,
// tool_count u32, lm fingerprint 32 bytes, tool names (u16 len + UTF-8) in
// order, then the row-major f32 matrix.

#include <cmath>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "toolken/common.hpp"
#include "toolken/core.hpp"
#include "toolken/dump.hpp"
#include "toolken/lm.hpp"

namespace toolken {

constexpr uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'T', 'K', 'E', 'N'};

struct ToolkenEmbeddings {
    uint32_t hidden_dim = 0;
    std::vector<std::string> tool_names;          // vocab order
    std::vector<float> matrix;                    // tool_count x hidden_dim
    Fingerprint lm_fingerprint{};

    size_t tool_count() const { return tool_names.size(); }

    std::span<const float> row(size_t j) const {
        return {matrix.data() + j * hidden_dim, hidden_dim};
    }

    void validate() const {
        if (matrix.size() != tool_names.size() * size_t(hidden_dim))
            throw InternalError("embedding matrix shape mismatch");
        for (float v : matrix)
            if (!std::isfinite(v)) throw InternalError("embedding matrix has non-finite entry");
    }
};

// Fused next-token logits: first |V| entries are the word logits unchanged,
// the last |T| entries are W_tau . h.
inline std::vector<float> fused_logits(std::span<const float> hidden,
                                       std::span<const float> word_logits,
                                       const ToolkenEmbeddings& emb) {
    if (hidden.size() != emb.hidden_dim)
        throw DataError("fused_logits: hidden dim mismatch");
    std::vector<float> out(word_logits.size() + emb.tool_count());
    std::copy(word_logits.begin(), word_logits.end(), out.begin());
    for (size_t j = 0; j < emb.tool_count(); ++j) {
        const float* w = emb.matrix.data() + j * emb.hidden_dim;
        double acc = 0.0;
        for (uint32_t k = 0; k < emb.hidden_dim; ++k) acc += double(w[k]) * double(hidden[k]);
        out[word_logits.size() + j] = static_cast<float>(acc);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss and gradient over explicit positions (64-bit internally).

struct LossPosition {
    std::vector<float> hidden;
    int64_t fused_target = -1;  // < base for word, base+j for toolken, -1 ignored
    std::vector<float> word_logits;
};

struct LossBatch {
    uint32_t hidden_dim = 0;
    uint32_t base_vocab = 0;
    std::vector<LossPosition> positions;
};

struct LossGrad {
    double loss = 0.0;
    std::vector<double> grad;  // tool_count x hidden_dim
    size_t supervised = 0;
};

// Mean negative log fused-softmax probability of the target over non-sentinel
// positions; sentinel positions contribute exactly nothing to either output.
inline LossGrad loss_and_grad(const LossBatch& batch, const std::vector<double>& w_tau,
                              size_t tool_count) {
    const uint32_t d = batch.hidden_dim;
    if (w_tau.size() != tool_count * size_t(d))
        throw DataError("loss_and_grad: W_tau shape mismatch");
    LossGrad out;
    out.grad.assign(w_tau.size(), 0.0);

    std::vector<double> z(tool_count);
    for (const auto& pos : batch.positions) {
        if (pos.fused_target < 0) continue;  // [N/A]
        const uint32_t target = static_cast<uint32_t>(pos.fused_target);
        if (target >= batch.base_vocab + tool_count)
            throw DataError("loss_and_grad: target out of fused range");
        if (pos.hidden.size() != d || pos.word_logits.size() != batch.base_vocab)
            throw DataError("loss_and_grad: position shape mismatch");

        double zmax = -HUGE_VAL;
        for (float wl : pos.word_logits) zmax = std::max(zmax, double(wl));
        for (size_t j = 0; j < tool_count; ++j) {
            double acc = 0.0;
            const double* w = w_tau.data() + j * d;
            for (uint32_t k = 0; k < d; ++k) acc += w[k] * double(pos.hidden[k]);
            z[j] = acc;
            zmax = std::max(zmax, acc);
        }
        double sum = 0.0;
        for (float wl : pos.word_logits) sum += std::exp(double(wl) - zmax);
        for (size_t j = 0; j < tool_count; ++j) sum += std::exp(z[j] - zmax);
        const double log_z = zmax + std::log(sum);

        const double target_logit = target < batch.base_vocab
                                        ? double(pos.word_logits[target])
                                        : z[target - batch.base_vocab];
        out.loss += log_z - target_logit;

        for (size_t j = 0; j < tool_count; ++j) {
            const double p = std::exp(z[j] - log_z);
            double* g = out.grad.data() + j * d;
            for (uint32_t k = 0; k < d; ++k) g[k] += p * double(pos.hidden[k]);
        }
        if (target >= batch.base_vocab) {
            double* g = out.grad.data() + (target - batch.base_vocab) * d;
            for (uint32_t k = 0; k < d; ++k) g[k] -= double(pos.hidden[k]);
        }
        ++out.supervised;
    }
    if (out.supervised > 0) {
        const double inv = 1.0 / double(out.supervised);
        out.loss *= inv;
        for (double& g : out.grad) g *= inv;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Training configuration.

enum class Optimizer { Sgd, Adam };
enum class InitScheme { Gaussian, WarmStart };

struct TrainConfig {
    double learning_rate = 1e-2;
    Optimizer optimizer = Optimizer::Adam;
    size_t batch_size = 0;          // 0 = full batch
    size_t epochs = 60;
    uint64_t seed = 1;
    InitScheme init = InitScheme::Gaussian;
    double init_sigma = 0.0;        // 0 -> 1/sqrt(d)
    size_t patience = 5;            // early stop on validation toolken accuracy
    bool class_balance = false;     // subsample word-target positions
    double word_sample_rate = 0.25; // kept fraction when class_balance is on
    double val_fraction = 0.1;      // toolken positions held out for validation
    size_t threads = 1;             // fixed-order tree reduction when > 1
    bool strict_fingerprint = true;

    void validate() const {
        if (learning_rate <= 0) throw UsageError("learning_rate must be positive");
        if (epochs < 1) throw UsageError("epochs must be at least 1");
        if (val_fraction < 0 || val_fraction >= 1) throw UsageError("bad val_fraction");
        if (threads < 1) throw UsageError("threads must be at least 1");
    }
};

struct EpochStats {
    double train_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    size_t selected_epoch = 0;
    size_t supervised_positions = 0;
    size_t toolken_positions = 0;
    size_t word_positions = 0;
    size_t val_positions = 0;

    nlohmann::json to_json() const {
        nlohmann::json doc;
        doc["selected_epoch"] = selected_epoch;
        doc["supervised_positions"] = supervised_positions;
        doc["toolken_positions"] = toolken_positions;
        doc["word_positions"] = word_positions;
        doc["val_positions"] = val_positions;
        nlohmann::json eps = nlohmann::json::array();
        for (const auto& e : epochs)
            eps.push_back({{"train_loss", e.train_loss}, {"val_accuracy", e.val_accuracy}});
        doc["epochs"] = std::move(eps);
        return doc;
    }
};

// ---------------------------------------------------------------------------
// fit: harvested dump + the backend's head. Word-logit terms per position are
// constants of the frozen head, computed once up front.

namespace detail {

struct CachedPosition {
    const float* hidden = nullptr;   // borrowed from the dump
    bool is_toolken = false;
    uint32_t toolken_index = 0;      // when is_toolken
    double word_target_logit = 0.0;  // when word target
    double word_logsumexp = 0.0;
    double word_max = 0.0;           // for fused-argmax validation accuracy
};

inline void accumulate_range(const std::vector<CachedPosition>& positions, size_t begin,
                             size_t end, const std::vector<double>& w, uint32_t d,
                             size_t tool_count, double* loss_out, std::vector<double>* grad_out) {
    std::vector<double> z(tool_count);
    double loss = 0.0;
    for (size_t p = begin; p < end; ++p) {
        const CachedPosition& cp = positions[p];
        double zmax = cp.word_max;
        for (size_t j = 0; j < tool_count; ++j) {
            const double* wr = w.data() + j * d;
            double acc = 0.0;
            for (uint32_t k = 0; k < d; ++k) acc += wr[k] * double(cp.hidden[k]);
            z[j] = acc;
            zmax = std::max(zmax, acc);
        }
        double sum = std::exp(cp.word_logsumexp - zmax);
        for (size_t j = 0; j < tool_count; ++j) sum += std::exp(z[j] - zmax);
        const double log_z = zmax + std::log(sum);
        const double target_logit =
            cp.is_toolken ? z[cp.toolken_index] : cp.word_target_logit;
        loss += log_z - target_logit;
        for (size_t j = 0; j < tool_count; ++j) {
            const double p_j = std::exp(z[j] - log_z);
            double* g = grad_out->data() + j * d;
            for (uint32_t k = 0; k < d; ++k) g[k] += p_j * double(cp.hidden[k]);
        }
        if (cp.is_toolken) {
            double* g = grad_out->data() + cp.toolken_index * d;
            for (uint32_t k = 0; k < d; ++k) g[k] -= double(cp.hidden[k]);
        }
    }
    *loss_out = loss;
}

}  // namespace detail

struct FitResult {
    ToolkenEmbeddings embeddings;
    TrainReport report;
};

inline FitResult fit(const Dump& dump, const ToolkenVocab& vocab, const LMBackend& head,
                     const TrainConfig& cfg) {
    cfg.validate();
    const uint32_t d = dump.header.hidden_dim;
    const uint32_t base = dump.header.base_vocab_size;
    const size_t tool_count = dump.header.tool_names.size();
    if (d != head.hidden_dim() || base != head.vocab_size())
        throw DataError("dump header does not match the head backend");
    if (dump.header.fingerprint != head.fingerprint()) {
        if (cfg.strict_fingerprint)
            throw DataError("dump fingerprint does not match the backend");
    }
    if (vocab.tool_count() != tool_count)
        throw DataError("vocab tool count does not match the dump");
    for (size_t j = 0; j < tool_count; ++j)
        if (vocab.tool_at(j).name != dump.header.tool_names[j])
            throw DataError("vocab/dump tool order mismatch at index " + std::to_string(j));

    // Gather supervised positions. Word-target positions may be subsampled
    // (class balance) before the head terms are computed, so the cache pass
    // below only touches positions that actually train.
    struct RawPosition {
        const float* hidden;
        uint32_t target;
    };
    std::vector<RawPosition> toolken_raw, word_raw;
    for (const auto& rec : dump.records) {
        for (size_t k = 0; k < rec.targets.size(); ++k) {
            const uint32_t target = rec.targets[k];
            if (target == kIgnoredTarget) continue;
            if (target >= base + tool_count)
                throw DataError("dump target out of fused range");
            RawPosition raw{rec.hidden.data() + k * d, target};
            if (target >= base) toolken_raw.push_back(raw);
            else word_raw.push_back(raw);
        }
    }
    if (toolken_raw.empty()) throw DataError("empty supervision: no toolken targets in dump");

    Rng rng(cfg.seed);

    if (cfg.class_balance) {
        std::vector<RawPosition> kept;
        kept.reserve(size_t(double(word_raw.size()) * cfg.word_sample_rate) + 1);
        for (const auto& wp : word_raw)
            if (rng.uniform01() < cfg.word_sample_rate) kept.push_back(wp);
        word_raw = std::move(kept);
    }

    // frozen head: the word-logit terms per position never change across epochs
    auto cache_position = [&](const RawPosition& raw) {
        detail::CachedPosition cp;
        cp.hidden = raw.hidden;
        HiddenState h(raw.hidden, raw.hidden + d);
        WordLogits wl = head.head_logits(h);
        double wmax = -HUGE_VAL;
        for (float v : wl) wmax = std::max(wmax, double(v));
        double sum = 0.0;
        for (float v : wl) sum += std::exp(double(v) - wmax);
        cp.word_max = wmax;
        cp.word_logsumexp = wmax + std::log(sum);
        if (raw.target >= base) {
            cp.is_toolken = true;
            cp.toolken_index = raw.target - base;
        } else {
            cp.word_target_logit = double(wl[raw.target]);
        }
        return cp;
    };
    std::vector<detail::CachedPosition> toolken_pos, word_pos;
    toolken_pos.reserve(toolken_raw.size());
    word_pos.reserve(word_raw.size());
    for (const auto& raw : toolken_raw) toolken_pos.push_back(cache_position(raw));
    for (const auto& raw : word_raw) word_pos.push_back(cache_position(raw));

    // validation split over toolken positions
    std::vector<size_t> order(toolken_pos.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    const size_t val_count = size_t(double(toolken_pos.size()) * cfg.val_fraction);
    std::vector<detail::CachedPosition> val_pos, train_pos;
    for (size_t i = 0; i < order.size(); ++i) {
        if (i < val_count) val_pos.push_back(toolken_pos[order[i]]);
        else train_pos.push_back(toolken_pos[order[i]]);
    }
    train_pos.insert(train_pos.end(), word_pos.begin(), word_pos.end());

    TrainReport report;
    report.toolken_positions = toolken_pos.size();
    report.word_positions = word_pos.size();
    report.supervised_positions = train_pos.size();
    report.val_positions = val_pos.size();

    // init
    std::vector<double> w(tool_count * size_t(d), 0.0);
    const double sigma = cfg.init_sigma > 0 ? cfg.init_sigma : 1.0 / std::sqrt(double(d));
    for (auto& v : w) v = rng.gaussian() * sigma;
    if (cfg.init == InitScheme::WarmStart) {
        std::vector<double> mean(tool_count * size_t(d), 0.0);
        std::vector<size_t> counts(tool_count, 0);
        for (const auto& cp : train_pos) {
            if (!cp.is_toolken) continue;
            double* m = mean.data() + cp.toolken_index * d;
            for (uint32_t k = 0; k < d; ++k) m[k] += double(cp.hidden[k]);
            ++counts[cp.toolken_index];
        }
        for (size_t j = 0; j < tool_count; ++j) {
            if (counts[j] == 0) continue;  // gaussian fallback
            double* m = mean.data() + j * d;
            double* row = w.data() + j * d;
            for (uint32_t k = 0; k < d; ++k) row[k] = m[k] / double(counts[j]);
        }
    }

    // optimizer state
    std::vector<double> adam_m, adam_v;
    if (cfg.optimizer == Optimizer::Adam) {
        adam_m.assign(w.size(), 0.0);
        adam_v.assign(w.size(), 0.0);
    }
    uint64_t adam_t = 0;

    auto apply_update = [&](const std::vector<double>& grad, size_t supervised) {
        if (supervised == 0) return;
        const double inv = 1.0 / double(supervised);
        if (cfg.optimizer == Optimizer::Sgd) {
            for (size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * grad[i] * inv;
        } else {
            ++adam_t;
            constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
            const double bc1 = 1.0 - std::pow(b1, double(adam_t));
            const double bc2 = 1.0 - std::pow(b2, double(adam_t));
            for (size_t i = 0; i < w.size(); ++i) {
                const double g = grad[i] * inv;
                adam_m[i] = b1 * adam_m[i] + (1 - b1) * g;
                adam_v[i] = b2 * adam_v[i] + (1 - b2) * g * g;
                w[i] -= cfg.learning_rate * (adam_m[i] / bc1) /
                        (std::sqrt(adam_v[i] / bc2) + eps);
            }
        }
    };

    auto batch_grad = [&](size_t begin, size_t end, double* loss_out,
                          std::vector<double>& grad) {
        grad.assign(w.size(), 0.0);
        const size_t n = end - begin;
        const size_t nthreads = std::min<size_t>(cfg.threads, std::max<size_t>(n, 1));
        if (nthreads <= 1 || n < 256) {
            detail::accumulate_range(train_pos, begin, end, w, d, tool_count, loss_out, &grad);
            return;
        }
        std::vector<double> losses(nthreads, 0.0);
        std::vector<std::vector<double>> grads(nthreads);
        std::vector<std::thread> workers;
        const size_t chunk = (n + nthreads - 1) / nthreads;
        for (size_t t = 0; t < nthreads; ++t) {
            const size_t b = begin + t * chunk;
            const size_t e = std::min(end, b + chunk);
            grads[t].assign(w.size(), 0.0);
            if (b >= e) continue;
            workers.emplace_back([&, t, b, e] {
                detail::accumulate_range(train_pos, b, e, w, d, tool_count, &losses[t],
                                         &grads[t]);
            });
        }
        for (auto& th : workers) th.join();
        // fixed-order reduction keeps results deterministic per thread count
        *loss_out = 0.0;
        for (size_t t = 0; t < nthreads; ++t) {
            *loss_out += losses[t];
            for (size_t i = 0; i < grad.size(); ++i) grad[i] += grads[t][i];
        }
    };

    auto val_accuracy = [&]() {
        if (val_pos.empty()) return 0.0;
        size_t hit = 0;
        std::vector<double> z(tool_count);
        for (const auto& cp : val_pos) {
            double best = -HUGE_VAL;
            size_t best_j = 0;
            for (size_t j = 0; j < tool_count; ++j) {
                const double* wr = w.data() + j * d;
                double acc = 0.0;
                for (uint32_t k = 0; k < d; ++k) acc += wr[k] * double(cp.hidden[k]);
                if (acc > best) {
                    best = acc;
                    best_j = j;
                }
            }
            // fused argmax: the toolken must also beat every word logit
            if (best_j == cp.toolken_index && best > cp.word_max) ++hit;
        }
        return double(hit) / double(val_pos.size());
    };

    std::vector<double> grad;
    std::vector<double> best_w = w;
    double best_val = -1.0;
    size_t best_epoch = 0;
    size_t since_best = 0;

    const size_t n = train_pos.size();
    const size_t bs = cfg.batch_size == 0 ? n : cfg.batch_size;

    for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t b = 0; b < n; b += bs) {
            const size_t e = std::min(n, b + bs);
            double loss = 0.0;
            batch_grad(b, e, &loss, grad);
            if (!std::isfinite(loss))
                throw DataError("non-finite loss in batch starting at position " +
                                std::to_string(b));
            apply_update(grad, e - b);
            epoch_loss += loss;
            seen += e - b;
        }
        EpochStats stats;
        stats.train_loss = seen ? epoch_loss / double(seen) : 0.0;
        stats.val_accuracy = val_accuracy();
        report.epochs.push_back(stats);

        if (!val_pos.empty()) {
            if (stats.val_accuracy > best_val) {
                best_val = stats.val_accuracy;
                best_w = w;
                best_epoch = epoch;
                since_best = 0;
            } else if (++since_best > cfg.patience) {
                break;
            }
        } else {
            best_w = w;
            best_epoch = epoch;
        }
    }
    report.selected_epoch = best_epoch;

    FitResult result;
    result.embeddings.hidden_dim = d;
    result.embeddings.tool_names = dump.header.tool_names;
    result.embeddings.lm_fingerprint = dump.header.fingerprint;
    result.embeddings.matrix.resize(best_w.size());
    for (size_t i = 0; i < best_w.size(); ++i)
        result.embeddings.matrix[i] = static_cast<float>(best_w[i]);
    result.embeddings.validate();
    result.report = std::move(report);
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint IO.

inline void save_checkpoint(const ToolkenEmbeddings& emb, const std::string& path) {
    emb.validate();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot open checkpoint for writing: " + path);
    os.write(kCheckpointMagic, 4);
    write_u32le(os, kCheckpointVersion);
    write_u32le(os, emb.hidden_dim);
    write_u32le(os, static_cast<uint32_t>(emb.tool_names.size()));
    os.write(reinterpret_cast<const char*>(emb.lm_fingerprint.data()), 32);
    for (const auto& name : emb.tool_names) {
        if (name.size() > 0xFFFF) throw DataError("tool name too long for checkpoint");
        write_u16le(os, static_cast<uint16_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (float v : emb.matrix) write_f32le(os, v);
    os.close();
    if (os.fail()) throw DataError("checkpoint write failed: " + path);
}

inline ToolkenEmbeddings load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        throw DataError("checkpoint: corrupt header (bad magic) in " + path);
    const uint32_t version = read_u32le(is);
    if (version != kCheckpointVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version));
    ToolkenEmbeddings emb;
    emb.hidden_dim = read_u32le(is);
    const uint32_t tools = read_u32le(is);
    is.read(reinterpret_cast<char*>(emb.lm_fingerprint.data()), 32);
    if (!is) throw DataError("checkpoint: truncated header");
    for (uint32_t j = 0; j < tools; ++j) {
        const uint16_t len = read_u16le(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw DataError("checkpoint: truncated name table");
        emb.tool_names.push_back(std::move(name));
    }
    emb.matrix.resize(size_t(tools) * emb.hidden_dim);
    for (auto& v : emb.matrix) {
        v = read_f32le(is);
    }
    is.peek();
    if (!is.eof()) throw DataError("checkpoint: trailing bytes after matrix");
    emb.validate();
    return emb;
}

// Fingerprint policy at decode/training time.
enum class FingerprintPolicy { Error, Warn, Ignore };

inline bool check_fingerprint(const ToolkenEmbeddings& emb, const LMBackend& backend,
                              FingerprintPolicy policy, std::string* message = nullptr) {
    if (emb.lm_fingerprint == backend.fingerprint()) return true;
    std::string msg = "checkpoint was trained against a different backend (fingerprint " +
                      hex_string(emb.lm_fingerprint) + " vs " +
                      hex_string(backend.fingerprint()) + ")";
    if (message) *message = msg;
    if (policy == FingerprintPolicy::Error) throw DataError(msg);
    return false;
}

}  // namespace toolken
