#pragma once

// Hidden-state dump (TKHD): the boundary by which any frozen model feeds the
// trainer. Binary little-endian layout:
//   header: magic "TKHD", version u32, d u32, base_vocab_size u32,
//           fingerprint 32 bytes, tool_count u32,
//           tool names (u16 length + UTF-8) in vocab order
//   records: u32 seq_len, then seq_len x { u32 fused_target_id
//            (0xFFFFFFFF = ignored), d x f32 hidden }
//
// Supervised entries cover positions 1..n-1 of each sequence: entry k holds
// the target s'[k] paired with the hidden state after consuming s[0..k-1].

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "toolken/common.hpp"
#include "toolken/core.hpp"
#include "toolken/lm.hpp"

namespace toolken {

constexpr uint32_t kDumpVersion = 1;
constexpr uint32_t kIgnoredTarget = 0xFFFFFFFFu;
inline constexpr char kDumpMagic[4] = {'T', 'K', 'H', 'D'};

struct DumpHeader {
    uint32_t version = kDumpVersion;
    uint32_t hidden_dim = 0;
    uint32_t base_vocab_size = 0;
    Fingerprint fingerprint{};
    std::vector<std::string> tool_names;
};

struct DumpRecord {
    // entry k: target for position k+1 of the source sequence
    std::vector<uint32_t> targets;
    std::vector<float> hidden;  // targets.size() * hidden_dim, row-major
};

struct HarvestStats {
    uint64_t sequences = 0;
    uint64_t positions = 0;            // supervised entries written
    uint64_t word_targets = 0;
    uint64_t toolken_targets = 0;
    uint64_t ignored_targets = 0;
    std::map<std::string, uint64_t> per_tool;  // supervised count per toolken
};

class DumpWriter {
public:
    DumpWriter(const std::string& path, const DumpHeader& header)
        : os_(path, std::ios::binary | std::ios::trunc), hidden_dim_(header.hidden_dim) {
        if (!os_) throw DataError("cannot open dump for writing: " + path);
        os_.write(kDumpMagic, 4);
        write_u32le(os_, header.version);
        write_u32le(os_, header.hidden_dim);
        write_u32le(os_, header.base_vocab_size);
        os_.write(reinterpret_cast<const char*>(header.fingerprint.data()), 32);
        write_u32le(os_, static_cast<uint32_t>(header.tool_names.size()));
        for (const auto& name : header.tool_names) {
            if (name.size() > 0xFFFF) throw DataError("tool name too long for dump");
            write_u16le(os_, static_cast<uint16_t>(name.size()));
            os_.write(name.data(), static_cast<std::streamsize>(name.size()));
        }
        check();
    }

    void write_record(const DumpRecord& rec) {
        if (rec.hidden.size() != rec.targets.size() * hidden_dim_)
            throw InternalError("dump record shape mismatch");
        write_u32le(os_, static_cast<uint32_t>(rec.targets.size()));
        for (size_t k = 0; k < rec.targets.size(); ++k) {
            write_u32le(os_, rec.targets[k]);
            for (uint32_t j = 0; j < hidden_dim_; ++j)
                write_f32le(os_, rec.hidden[k * hidden_dim_ + j]);
        }
        check();
    }

    void close() {
        os_.close();
        if (os_.fail()) throw DataError("dump write failed on close");
    }

private:
    void check() {
        if (!os_) throw DataError("dump write failed");
    }

    std::ofstream os_;
    uint32_t hidden_dim_;
};

struct Dump {
    DumpHeader header;
    std::vector<DumpRecord> records;

    uint64_t total_entries() const {
        uint64_t n = 0;
        for (const auto& r : records) n += r.targets.size();
        return n;
    }
};

inline Dump read_dump(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open dump: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kDumpMagic, 4) != 0)
        throw DataError("dump: bad magic in " + path);
    Dump dump;
    dump.header.version = read_u32le(is);
    if (dump.header.version != kDumpVersion)
        throw DataError("dump: unsupported version " + std::to_string(dump.header.version));
    dump.header.hidden_dim = read_u32le(is);
    dump.header.base_vocab_size = read_u32le(is);
    is.read(reinterpret_cast<char*>(dump.header.fingerprint.data()), 32);
    if (!is) throw DataError("dump: truncated header");
    uint32_t tool_count = read_u32le(is);
    dump.header.tool_names.reserve(tool_count);
    for (uint32_t i = 0; i < tool_count; ++i) {
        uint16_t len = read_u16le(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw DataError("dump: truncated tool name table");
        dump.header.tool_names.push_back(std::move(name));
    }
    const uint32_t d = dump.header.hidden_dim;
    while (true) {
        is.peek();
        if (is.eof()) break;
        uint32_t seq_len = read_u32le(is);
        DumpRecord rec;
        rec.targets.resize(seq_len);
        rec.hidden.resize(size_t(seq_len) * d);
        for (uint32_t k = 0; k < seq_len; ++k) {
            rec.targets[k] = read_u32le(is);
            for (uint32_t j = 0; j < d; ++j) rec.hidden[size_t(k) * d + j] = read_f32le(is);
        }
        dump.records.push_back(std::move(rec));
    }
    return dump;
}

// ---------------------------------------------------------------------------
// Harvest: run the frozen backend over paired sequences once and record
// (fused target, preceding hidden state) per position. Record order follows
// input order, so dump bytes are a deterministic function of corpus+backend.

struct ParallelSequence;  // defined in data.hpp

namespace detail {

// s-prime entries use int64 in memory: >= 0 fused id, -1 ignore sentinel.
constexpr int64_t kSentinel = -1;

}  // namespace detail

template <typename SequenceRange>
HarvestStats harvest_to(const LMBackend& backend, const ToolkenVocab& vocab,
                        const SequenceRange& corpus, const std::string& out_path) {
    DumpHeader header;
    header.hidden_dim = backend.hidden_dim();
    header.base_vocab_size = backend.vocab_size();
    header.fingerprint = backend.fingerprint();
    for (const auto& t : vocab.tools()) header.tool_names.push_back(t.name);
    if (vocab.base_vocab_size() != backend.vocab_size())
        throw DataError("vocab base_vocab_size does not match backend vocab size");

    DumpWriter writer(out_path, header);
    HarvestStats stats;
    const uint32_t d = backend.hidden_dim();

    for (const auto& seq : corpus) {
        const auto& s = seq.tokens;
        const auto& sp = seq.targets;
        if (s.size() != sp.size()) throw InternalError("paired sequence length mismatch");
        if (s.empty()) throw DataError("harvest: empty sequence");
        auto session = backend.start_session();
        DumpRecord rec;
        const size_t entries = s.size() - 1;
        rec.targets.reserve(entries);
        rec.hidden.reserve(entries * d);
        for (size_t i = 0; i + 1 < s.size(); ++i) {
            session->append(s[i]);
            HiddenState h = session->current_hidden();
            int64_t target = sp[i + 1];
            uint32_t stored;
            if (target == detail::kSentinel) {
                stored = kIgnoredTarget;
                ++stats.ignored_targets;
            } else {
                stored = static_cast<uint32_t>(target);
                if (stored >= vocab.fused_size())
                    throw DataError("harvest: fused target out of range");
                if (vocab.is_toolken(stored)) {
                    ++stats.toolken_targets;
                    ++stats.per_tool[vocab.tool_for(stored).name];
                } else {
                    ++stats.word_targets;
                }
            }
            rec.targets.push_back(stored);
            rec.hidden.insert(rec.hidden.end(), h.begin(), h.end());
        }
        writer.write_record(rec);
        ++stats.sequences;
        stats.positions += rec.targets.size();
    }
    writer.close();
    return stats;
}

}  // namespace toolken
