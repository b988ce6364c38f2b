// toolken: command-line front end tying the pipeline together.
//
//   synth        synthetic one-hop arithmetic traces (+ vocab with demos)
//   kb-qa        KB facts TSV -> QA traces (+ relation vocab with demos)
//   kb-subsets   nested relation evaluation subsets
//   plan-corpus  mini-home scenario corpus
//   preprocess   traces -> paired token/target sequences
//   harvest      paired sequences -> hidden-state dump (TKHD)
//   train        dump -> toolken-embedding checkpoint (TKEN) + report
//   generate     prompts/scenarios -> transcripts or plans
//   eval         transcripts/plans -> metric report
//   inspect      human-readable checkpoint dump
//
// Exit codes: 0 success, 1 usage/config error, 2 data error, 3 internal error.

#include <cstdlib>
#include <iostream>
#include <map>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "toolken/arith.hpp"
#include "toolken/common.hpp"
#include "toolken/core.hpp"
#include "toolken/data.hpp"
#include "toolken/decoder.hpp"
#include "toolken/dump.hpp"
#include "toolken/eval.hpp"
#include "toolken/kb.hpp"
#include "toolken/lm.hpp"
#include "toolken/minihome.hpp"
#include "toolken/trainer.hpp"

using namespace toolken;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Plain-text key/value run configuration: `key = value` lines, # comments.
// Unknown keys are rejected against the set of keys commands declare. TK_
// environment variables override file values (TK_TRAIN_EPOCHS -> train.epochs).

class RunConfig {
public:
    void load_file(const std::string& path) {
        size_t line_no = 0;
        for (const std::string& raw : read_lines(path)) {
            ++line_no;
            std::string line = trim(raw);
            if (line.empty() || line[0] == '#') continue;
            size_t eq = line.find('=');
            if (eq == std::string::npos)
                throw UsageError(path + ":" + std::to_string(line_no) +
                                 ": expected key = value");
            set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        }
    }

    void apply_env(char** envp) {
        for (char** e = envp; e && *e; ++e) {
            std::string entry(*e);
            if (!starts_with(entry, "TK_")) continue;
            size_t eq = entry.find('=');
            if (eq == std::string::npos) continue;
            std::string key = to_lower_ascii(entry.substr(3, eq - 3));
            for (char& c : key)
                if (c == '_') c = '.';
            set(key, entry.substr(eq + 1));
        }
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get(const std::string& key, const std::string& fallback) const {
        auto it = values_.find(key);
        used_.insert(key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_num(const std::string& key, double fallback) const {
        auto it = values_.find(key);
        used_.insert(key);
        if (it == values_.end()) return fallback;
        auto v = parse_number(it->second);
        if (!v) throw UsageError("config key " + key + " is not a number: " + it->second);
        return *v;
    }

    void reject_unknown() const {
        for (const auto& [key, value] : values_)
            if (!used_.count(key))
                throw UsageError("unknown config key: " + key);
    }

    void note(const std::string& key, const std::string& value) {
        notes_[key] = value;
    }

    void echo(const std::string& command) const {
        std::cerr << "# resolved config for '" << command << "'\n";
        for (const auto& [key, value] : notes_) std::cerr << "# " << key << " = " << value << "\n";
        for (const auto& key : used_) {
            auto it = values_.find(key);
            std::cerr << "# " << key << " = "
                      << (it == values_.end() ? "(default)" : it->second) << "\n";
        }
    }

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, std::string> notes_;
    mutable std::set<std::string> used_;
};

// "toy" or "toy:seed=7,gamma=0.97,feature_dim=80,code_dim=48,state_dim=192"
ToyConfig parse_backend_spec(const std::string& spec) {
    ToyConfig cfg;
    if (spec.empty() || spec == "toy") return cfg;
    if (!starts_with(spec, "toy:")) throw UsageError("unknown backend spec: " + spec);
    std::string rest = spec.substr(4);
    size_t pos = 0;
    while (pos < rest.size()) {
        size_t comma = rest.find(',', pos);
        std::string item = rest.substr(pos, comma == std::string::npos ? std::string::npos
                                                                       : comma - pos);
        pos = comma == std::string::npos ? rest.size() : comma + 1;
        size_t eq = item.find('=');
        if (eq == std::string::npos) throw UsageError("backend spec expects key=value: " + item);
        std::string key = trim(item.substr(0, eq));
        auto val = parse_number(item.substr(eq + 1));
        if (!val) throw UsageError("backend spec value is not numeric: " + item);
        if (key == "seed") cfg.seed = uint64_t(*val);
        else if (key == "gamma") cfg.gamma = float(*val);
        else if (key == "feature_dim") cfg.feature_dim = uint32_t(*val);
        else if (key == "code_dim") cfg.code_dim = uint32_t(*val);
        else if (key == "state_dim") cfg.state_dim = uint32_t(*val);
        else if (key == "code_gain") cfg.code_gain = float(*val);
        else throw UsageError("unknown backend spec key: " + key);
    }
    return cfg;
}

ToolkenVocab load_vocab(const std::string& path) {
    return ToolkenVocab::deserialize(read_file(path));
}

// Renders a trace with the call spelled out in [tool](args)=result form.
std::string demo_text(const AnnotatedTrace& t, const CallAnnotation& c) {
    return t.text.substr(0, c.start) + "[" + c.tool + "](" + c.raw_args + ")=" +
           t.text.substr(c.start, c.end - c.start) + t.text.substr(c.end);
}

void attach_demonstrations(ToolkenVocab& vocab, const std::vector<AnnotatedTrace>& traces,
                           size_t per_tool) {
    for (auto& spec : vocab.mutable_tools()) {
        if (spec.kind != ToolKind::FunctionWithArgs) continue;
        size_t added = spec.demonstrations.size();
        for (const auto& t : traces) {
            if (added >= per_tool) break;
            if (t.calls.size() != 1 || t.calls[0].tool != spec.name) continue;
            spec.demonstrations.push_back({demo_text(t, t.calls[0])});
            ++added;
        }
    }
}

std::vector<ParallelSequence> pairs_from_jsonl(const std::string& content) {
    std::vector<ParallelSequence> out;
    size_t pos = 0, line_no = 0;
    while (pos < content.size()) {
        size_t nl = content.find('\n', pos);
        std::string_view line(content.data() + pos,
                              (nl == std::string::npos ? content.size() : nl) - pos);
        pos = nl == std::string::npos ? content.size() : nl + 1;
        ++line_no;
        if (trim(line).empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded())
            throw DataError("pairs line " + std::to_string(line_no) + ": parse error");
        ParallelSequence seq;
        for (const auto& t : doc.at("tokens")) seq.tokens.push_back(t.get<uint32_t>());
        for (const auto& t : doc.at("targets")) seq.targets.push_back(t.get<int64_t>());
        if (seq.tokens.size() != seq.targets.size())
            throw DataError("pairs line " + std::to_string(line_no) + ": length mismatch");
        out.push_back(std::move(seq));
    }
    return out;
}

struct TrainFlags {
    double lr = 0.2;
    size_t epochs = 200;
    std::string optimizer = "adam";
    size_t batch = 0;
    uint64_t seed = 1;
    std::string init = "gaussian";
    size_t patience = 1000000;
    bool class_balance = false;
    double word_rate = 0.25;
    double val_fraction = 0.1;
    size_t threads = 1;

    TrainConfig to_config() const {
        TrainConfig cfg;
        cfg.learning_rate = lr;
        cfg.epochs = epochs;
        if (optimizer == "adam") cfg.optimizer = Optimizer::Adam;
        else if (optimizer == "sgd") cfg.optimizer = Optimizer::Sgd;
        else throw UsageError("optimizer must be adam or sgd");
        cfg.batch_size = batch;
        cfg.seed = seed;
        if (init == "gaussian") cfg.init = InitScheme::Gaussian;
        else if (init == "warm") cfg.init = InitScheme::WarmStart;
        else throw UsageError("init must be gaussian or warm");
        cfg.patience = patience;
        cfg.class_balance = class_balance;
        cfg.word_sample_rate = word_rate;
        cfg.val_fraction = val_fraction;
        cfg.threads = threads;
        return cfg;
    }
};

std::vector<std::pair<std::string, json>> read_jsonl_objects(const std::string& path) {
    std::vector<std::pair<std::string, json>> out;
    size_t line_no = 0;
    for (const auto& line : read_lines(path)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json doc = json::parse(line, nullptr, false);
        if (doc.is_discarded())
            throw DataError(path + ":" + std::to_string(line_no) + ": json parse error");
        std::string id = doc.value("id", "line" + std::to_string(line_no));
        out.emplace_back(id, std::move(doc));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv, char** envp) {
    CLI::App app{"toolken: tool-as-token training and decoding engine"};
    app.require_subcommand(1);

    std::string config_path;
    uint64_t global_seed = 0;
    size_t global_threads = 0;
    bool skip_bad = false;
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--seed", global_seed, "seed override");
    app.add_option("--threads", global_threads, "worker threads (1 = deterministic)");
    app.add_flag("--skip-bad", skip_bad, "skip malformed data lines instead of failing");

    RunConfig rc;

    // --- synth ---------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "synthesize one-hop arithmetic traces");
    std::string synth_ops = "all13", synth_templates, synth_train_out, synth_val_out,
                synth_vocab_out;
    size_t synth_train_n = 47, synth_val_n = 3;
    uint64_t synth_seed = 99;
    int synth_magnify = 0;
    size_t synth_demos = 4;
    synth->add_option("--ops", synth_ops, "all13, basic4, or comma-separated names");
    synth->add_option("--templates", synth_templates, "templates JSONL (default: built-in)");
    synth->add_option("--train-per-op", synth_train_n);
    synth->add_option("--val-per-op", synth_val_n);
    synth->add_option("--train-out", synth_train_out)->required();
    synth->add_option("--val-out", synth_val_out);
    synth->add_option("--vocab-out", synth_vocab_out, "vocab JSON with demonstrations");
    synth->add_option("--demos-per-tool", synth_demos);
    synth->add_option("--synth-seed", synth_seed);
    synth->add_option("--magnify", synth_magnify, "multiply basic-four operands by 10^k");

    // --- kb-qa ---------------------------------------------------------
    auto* kbqa = app.add_subcommand("kb-qa", "convert KB facts to QA traces");
    std::string kb_facts, kb_templates, kb_traces_out, kb_vocab_out;
    size_t kb_demos = 4;
    kbqa->add_option("--facts", kb_facts, "facts TSV")->required();
    kbqa->add_option("--templates", kb_templates, "JSONL {relation, template}")->required();
    kbqa->add_option("--out", kb_traces_out)->required();
    kbqa->add_option("--vocab-out", kb_vocab_out);
    kbqa->add_option("--demos-per-tool", kb_demos);

    // --- kb-subsets ----------------------------------------------------
    auto* kbsub = app.add_subcommand("kb-subsets", "sample nested evaluation subsets");
    std::string sub_facts, sub_out_prefix, sub_counts = "30,60,100,234";
    size_t sub_size = 500;
    uint64_t sub_seed = 77;
    kbsub->add_option("--facts", sub_facts, "test facts TSV")->required();
    kbsub->add_option("--counts", sub_counts);
    kbsub->add_option("--size", sub_size);
    kbsub->add_option("--subset-seed", sub_seed);
    kbsub->add_option("--out-prefix", sub_out_prefix)->required();

    // --- plan-corpus ---------------------------------------------------
    auto* plancorpus = app.add_subcommand("plan-corpus", "generate mini-home scenarios");
    std::string pc_out, pc_vocab_out, pc_rules_out;
    size_t pc_count = 200;
    uint64_t pc_seed = 11;
    plancorpus->add_option("--count", pc_count);
    plancorpus->add_option("--corpus-seed", pc_seed);
    plancorpus->add_option("--out", pc_out)->required();
    plancorpus->add_option("--vocab-out", pc_vocab_out);
    plancorpus->add_option("--rules-out", pc_rules_out);

    // --- preprocess ----------------------------------------------------
    auto* preprocess = app.add_subcommand("preprocess", "traces/scenarios -> paired sequences");
    std::string pre_traces, pre_vocab, pre_backend = "toy", pre_out, pre_mode = "text";
    preprocess->add_option("--traces", pre_traces, "traces JSONL (text mode)");
    preprocess->add_option("--scenarios", pre_traces, "scenario JSONL (plan mode)");
    preprocess->add_option("--mode", pre_mode, "text | plan");
    preprocess->add_option("--vocab", pre_vocab)->required();
    preprocess->add_option("--backend", pre_backend);
    preprocess->add_option("--out", pre_out)->required();

    // --- harvest -------------------------------------------------------
    auto* harvest = app.add_subcommand("harvest", "paired sequences -> hidden-state dump");
    std::string ha_pairs, ha_vocab, ha_backend = "toy", ha_out;
    harvest->add_option("--pairs", ha_pairs)->required();
    harvest->add_option("--vocab", ha_vocab)->required();
    harvest->add_option("--backend", ha_backend);
    harvest->add_option("--out", ha_out)->required();

    // --- train ---------------------------------------------------------
    auto* train = app.add_subcommand("train", "fit toolken embeddings from a dump");
    std::string tr_dump, tr_vocab, tr_backend = "toy", tr_out, tr_report;
    TrainFlags tf;
    train->add_option("--dump", tr_dump)->required();
    train->add_option("--vocab", tr_vocab)->required();
    train->add_option("--backend", tr_backend);
    train->add_option("--out", tr_out)->required();
    train->add_option("--report", tr_report);
    train->add_option("--lr", tf.lr);
    train->add_option("--epochs", tf.epochs);
    train->add_option("--optimizer", tf.optimizer, "adam | sgd");
    train->add_option("--batch", tf.batch, "0 = full batch");
    train->add_option("--train-seed", tf.seed);
    train->add_option("--init", tf.init, "gaussian | warm");
    train->add_option("--patience", tf.patience);
    train->add_flag("--class-balance", tf.class_balance);
    train->add_option("--word-rate", tf.word_rate);
    train->add_option("--val-fraction", tf.val_fraction);

    // --- generate ------------------------------------------------------
    auto* generate = app.add_subcommand("generate", "decode prompts with tool calls");
    std::string ge_prompts, ge_vocab, ge_backend = "toy", ge_ckpt, ge_out;
    std::string ge_mode = "text", ge_tools = "arith", ge_facts, ge_kb_templates, ge_scenarios;
    std::string ge_strategy = "greedy", ge_on_error = "resample";
    double ge_temperature = 1.0, ge_bias = 0.0;
    size_t ge_max_tokens = 64, ge_max_calls = 8, ge_demos = 4, ge_arg_tokens = 48;
    uint64_t ge_seed = 0;
    generate->add_option("--prompts", ge_prompts, "JSONL {id, prompt} (text mode)");
    generate->add_option("--scenarios", ge_scenarios, "scenario JSONL (plan mode)");
    generate->add_option("--vocab", ge_vocab)->required();
    generate->add_option("--backend", ge_backend);
    generate->add_option("--checkpoint", ge_ckpt)->required();
    generate->add_option("--out", ge_out)->required();
    generate->add_option("--mode", ge_mode, "text | plan");
    generate->add_option("--tools", ge_tools, "arith | basic4 | kb | none");
    generate->add_option("--kb-facts", ge_facts, "facts TSV for kb executors");
    generate->add_option("--kb-templates", ge_kb_templates);
    generate->add_option("--strategy", ge_strategy, "greedy | sample");
    generate->add_option("--temperature", ge_temperature);
    generate->add_option("--decode-seed", ge_seed);
    generate->add_option("--max-new-tokens", ge_max_tokens);
    generate->add_option("--max-tool-calls", ge_max_calls);
    generate->add_option("--toolken-bias", ge_bias);
    generate->add_option("--tool-demos", ge_demos);
    generate->add_option("--max-arg-tokens", ge_arg_tokens);
    generate->add_option("--on-tool-error", ge_on_error, "resample | abort");

    // --- eval ----------------------------------------------------------
    auto* eval = app.add_subcommand("eval", "score transcripts or plans");
    std::string ev_transcripts, ev_gold, ev_mode = "numeric-exact", ev_out, ev_scenarios,
                ev_vocab;
    eval->add_option("--transcripts", ev_transcripts, "JSONL from generate");
    eval->add_option("--gold", ev_gold, "JSONL {id, answer, tool?}");
    eval->add_option("--mode", ev_mode, "numeric-exact | numeric-tolerance | kb | plan");
    eval->add_option("--scenarios", ev_scenarios, "scenario JSONL (plan mode)");
    eval->add_option("--vocab", ev_vocab, "vocab JSON (plan mode grounding)");
    eval->add_option("--out", ev_out, "report JSON path");

    // --- inspect -------------------------------------------------------
    auto* inspect = app.add_subcommand("inspect", "describe a checkpoint");
    std::string in_ckpt;
    inspect->add_option("--checkpoint", in_ckpt)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) rc.load_file(config_path);
        rc.apply_env(envp);
        if (global_seed) rc.note("flag.seed", std::to_string(global_seed));
        if (global_threads) rc.note("flag.threads", std::to_string(global_threads));
        if (skip_bad) rc.note("flag.skip_bad", "true");
        if (!config_path.empty()) rc.note("flag.config", config_path);

        // ---------------- synth ----------------
        if (synth->parsed()) {
            uint64_t seed = global_seed ? global_seed
                                        : uint64_t(rc.get_num("synth.seed", double(synth_seed)));
            rc.reject_unknown();
            rc.echo("synth");
            std::vector<std::string> ops;
            if (synth_ops == "all13")
                for (const auto& op : arithmetic_ops()) ops.push_back(op.name);
            else if (synth_ops == "basic4")
                ops = basic_four();
            else {
                size_t pos = 0;
                while (pos <= synth_ops.size()) {
                    size_t comma = synth_ops.find(',', pos);
                    ops.push_back(trim(synth_ops.substr(
                        pos, comma == std::string::npos ? std::string::npos : comma - pos)));
                    if (comma == std::string::npos) break;
                    pos = comma + 1;
                }
            }
            std::vector<TemplatePattern> templates =
                synth_templates.empty() ? builtin_arith_templates()
                                        : templates_from_jsonl(read_file(synth_templates));
            std::vector<AnnotatedTrace> train_traces, val_traces;
            for (const auto& op : ops) {
                auto traces =
                    synth_onehop(op, templates, synth_train_n + synth_val_n, seed, synth_magnify);
                for (size_t i = 0; i < traces.size(); ++i)
                    (i < synth_train_n ? train_traces : val_traces).push_back(traces[i]);
            }
            write_file(synth_train_out, traces_to_jsonl(train_traces));
            if (!synth_val_out.empty()) write_file(synth_val_out, traces_to_jsonl(val_traces));
            if (!synth_vocab_out.empty()) {
                ToyLM lm(parse_backend_spec("toy"));
                ToolkenVocab vocab(lm.vocab_size());
                {
                    ToolRegistry reg(std::move(vocab));
                    register_arithmetic(reg, ops);
                    vocab = reg.vocab();
                }
                attach_demonstrations(vocab, train_traces, synth_demos);
                write_file(synth_vocab_out, vocab.serialize());
            }
            std::cout << "train=" << train_traces.size() << " val=" << val_traces.size()
                      << "\n";
            return 0;
        }

        // ---------------- kb-qa ----------------
        if (kbqa->parsed()) {
            rc.reject_unknown();
            rc.echo("kb-qa");
            TripleStore store;
            for (const auto& [id, doc] : read_jsonl_objects(kb_templates))
                store.set_template(doc.at("relation").get<std::string>(),
                                   doc.at("template").get<std::string>());
            auto facts = parse_facts_tsv(read_file(kb_facts));
            for (const auto& f : facts) store.add_fact(f);
            std::vector<AnnotatedTrace> traces;
            size_t skipped = 0;
            for (const auto& f : facts) {
                if (!store.has_template(f.relation)) {
                    if (!skip_bad) throw DataError("missing template for " + f.relation);
                    ++skipped;
                    continue;
                }
                traces.push_back(kb_to_qa(f, store));
            }
            write_file(kb_traces_out, traces_to_jsonl(traces));
            if (!kb_vocab_out.empty()) {
                ToyLM lm;
                ToolRegistry reg{ToolkenVocab(lm.vocab_size())};
                register_kb_relations(reg, store);
                ToolkenVocab vocab = reg.vocab();
                attach_demonstrations(vocab, traces, kb_demos);
                write_file(kb_vocab_out, vocab.serialize());
            }
            std::cout << "traces=" << traces.size() << " skipped=" << skipped << "\n";
            return 0;
        }

        // ---------------- kb-subsets ----------------
        if (kbsub->parsed()) {
            rc.reject_unknown();
            rc.echo("kb-subsets");
            auto facts = parse_facts_tsv(read_file(sub_facts));
            std::vector<size_t> counts;
            size_t pos = 0;
            while (pos <= sub_counts.size()) {
                size_t comma = sub_counts.find(',', pos);
                std::string item = sub_counts.substr(
                    pos, comma == std::string::npos ? std::string::npos : comma - pos);
                auto v = parse_number(item);
                if (!v || *v < 1 || *v != std::trunc(*v))
                    throw UsageError("--counts expects positive integers, got '" + item + "'");
                counts.push_back(size_t(*v));
                if (comma == std::string::npos) break;
                pos = comma + 1;
            }
            auto subsets = sample_kb_subsets(facts, counts, sub_size,
                                             global_seed ? global_seed : sub_seed);
            for (size_t s = 0; s < subsets.size(); ++s) {
                std::string base = sub_out_prefix + std::to_string(counts[s]);
                write_file(base + ".tsv", facts_to_tsv(subsets[s].questions));
                std::string rels;
                for (const auto& r : subsets[s].relations) rels += r + "\n";
                write_file(base + ".relations", rels);
                std::cout << base << ".tsv n=" << subsets[s].questions.size() << "\n";
            }
            return 0;
        }

        // ---------------- plan-corpus ----------------
        if (plancorpus->parsed()) {
            rc.reject_unknown();
            rc.echo("plan-corpus");
            auto corpus = demo_corpus(pc_count, global_seed ? global_seed : pc_seed);
            std::string out;
            size_t sid = 0;
            for (const auto& s : corpus) {
                json doc = scenario_to_json(s);
                doc["id"] = "s" + std::to_string(sid++);
                out += doc.dump() + "\n";
            }
            write_file(pc_out, out);
            if (!pc_vocab_out.empty()) {
                ToyLM lm;
                ToolkenVocab vocab(lm.vocab_size());
                register_plan_toolkens(vocab);
                write_file(pc_vocab_out, vocab.serialize());
            }
            if (!pc_rules_out.empty())
                write_file(pc_rules_out, rule_table_to_json(default_rule_table()).dump(2) + "\n");
            std::cout << "scenarios=" << corpus.size() << "\n";
            return 0;
        }

        // ---------------- preprocess ----------------
        if (preprocess->parsed()) {
            rc.reject_unknown();
            rc.echo("preprocess");
            if (pre_traces.empty())
                throw UsageError("preprocess needs --traces (or --scenarios in plan mode)");
            ToyLM lm(parse_backend_spec(pre_backend));
            ToolkenVocab vocab = load_vocab(pre_vocab);
            const bool plan_mode = pre_mode == "plan";
            std::string out;
            size_t line_no = 0, bad = 0, written = 0;
            for (const auto& line : read_lines(pre_traces)) {
                ++line_no;
                if (trim(line).empty()) continue;
                try {
                    json doc = json::parse(line);
                    ParallelSequence seq =
                        plan_mode
                            ? build_plan_sequence(scenario_from_json(doc), lm, vocab)
                            : build_parallel(trace_from_json(doc), lm, vocab);
                    json jseq;
                    jseq["tokens"] = seq.tokens;
                    jseq["targets"] = seq.targets;
                    out += jseq.dump() + "\n";
                    ++written;
                } catch (const std::exception& e) {
                    std::cerr << "line " << line_no << ": " << e.what() << "\n";
                    if (!skip_bad) return 2;
                    ++bad;
                }
            }
            write_file(pre_out, out);
            std::cout << "pairs=" << written << " skipped=" << bad << "\n";
            return 0;
        }

        // ---------------- harvest ----------------
        if (harvest->parsed()) {
            rc.reject_unknown();
            rc.echo("harvest");
            ToyLM lm(parse_backend_spec(ha_backend));
            ToolkenVocab vocab = load_vocab(ha_vocab);
            auto pairs = pairs_from_jsonl(read_file(ha_pairs));
            HarvestStats stats = harvest_to(lm, vocab, pairs, ha_out);
            json jstats;
            jstats["sequences"] = stats.sequences;
            jstats["positions"] = stats.positions;
            jstats["word_targets"] = stats.word_targets;
            jstats["toolken_targets"] = stats.toolken_targets;
            jstats["ignored_targets"] = stats.ignored_targets;
            jstats["per_tool"] = stats.per_tool;
            std::cout << jstats.dump(2) << "\n";
            return 0;
        }

        // ---------------- train ----------------
        if (train->parsed()) {
            TrainConfig cfg = tf.to_config();
            cfg.learning_rate = rc.get_num("train.learning_rate", cfg.learning_rate);
            cfg.epochs = size_t(rc.get_num("train.epochs", double(cfg.epochs)));
            if (global_seed) cfg.seed = global_seed;
            if (global_threads) cfg.threads = global_threads;
            rc.reject_unknown();
            rc.echo("train");
            ToyLM lm(parse_backend_spec(tr_backend));
            ToolkenVocab vocab = load_vocab(tr_vocab);
            Dump dump = read_dump(tr_dump);
            FitResult result = fit(dump, vocab, lm, cfg);
            save_checkpoint(result.embeddings, tr_out);
            if (!tr_report.empty())
                write_file(tr_report, result.report.to_json().dump(2) + "\n");
            std::cout << "epochs=" << result.report.epochs.size()
                      << " selected=" << result.report.selected_epoch << " val_accuracy="
                      << (result.report.epochs.empty()
                              ? 0.0
                              : result.report.epochs[result.report.selected_epoch].val_accuracy)
                      << "\n";
            return 0;
        }

        // ---------------- generate ----------------
        if (generate->parsed()) {
            rc.reject_unknown();
            rc.echo("generate");
            ToyLM lm(parse_backend_spec(ge_backend));
            ToolRegistry registry{load_vocab(ge_vocab)};
            TripleStore store;
            if (ge_tools == "kb") {
                if (ge_facts.empty()) throw UsageError("--tools kb needs --kb-facts");
                if (!ge_kb_templates.empty())
                    for (const auto& [id, doc] : read_jsonl_objects(ge_kb_templates))
                        store.set_template(doc.at("relation").get<std::string>(),
                                           doc.at("template").get<std::string>());
                for (const auto& f : parse_facts_tsv(read_file(ge_facts))) store.add_fact(f);
                for (const auto& t : registry.vocab().tools())
                    if (t.kind == ToolKind::FunctionWithArgs && store.has_relation(t.name)) {
                        const std::string rel = t.name;
                        const TripleStore* sp = &store;
                        registry.bind(rel, [rel, sp](const std::vector<ArgValue>& args) {
                            if (args.size() != 1 ||
                                !std::holds_alternative<std::string>(args[0]))
                                throw DataError(rel + ": expected a single subject entity");
                            return ToolResult{
                                exec_kb(rel, std::get<std::string>(args[0]), *sp),
                                std::nullopt};
                        });
                    }
            } else if (ge_tools == "arith" || ge_tools == "basic4") {
                for (const auto& t : registry.vocab().tools()) {
                    if (t.kind != ToolKind::FunctionWithArgs) continue;
                    const std::string name = t.name;
                    registry.bind(name, [name](const std::vector<ArgValue>& args) {
                        std::vector<double> nums;
                        for (const auto& a : args) {
                            if (!std::holds_alternative<double>(a))
                                throw ArithError(name + ": arguments must be numbers");
                            nums.push_back(std::get<double>(a));
                        }
                        double r = exec_arith(name, nums);
                        return ToolResult{render_number(r), r};
                    });
                }
            } else if (ge_tools != "none") {
                throw UsageError("--tools must be arith, basic4, kb or none");
            }

            ToolkenEmbeddings emb = load_checkpoint(ge_ckpt);
            DecodeConfig dc;
            dc.strategy = ge_strategy == "sample" ? DecodeStrategy::Sample
                                                  : DecodeStrategy::Greedy;
            dc.temperature = ge_temperature;
            dc.seed = global_seed ? global_seed : ge_seed;
            dc.max_new_tokens = ge_max_tokens;
            dc.max_tool_calls = ge_max_calls;
            dc.toolken_bias = ge_bias;
            dc.tool_mode_demos = ge_demos;
            dc.max_arg_tokens = ge_arg_tokens;
            dc.on_tool_error = ge_on_error == "abort" ? ToolErrorPolicy::Abort
                                                      : ToolErrorPolicy::ResampleExcluding;
            DecodeSession session(lm, registry, emb, dc);
            if (!session.fingerprint_warning().empty())
                std::cerr << "warning: " << session.fingerprint_warning() << "\n";

            std::string out;
            if (ge_mode == "plan") {
                if (ge_scenarios.empty()) throw UsageError("plan mode needs --scenarios");
                for (const auto& [id, doc] : read_jsonl_objects(ge_scenarios)) {
                    PlanScenario s = scenario_from_json(doc);
                    PlanSequence plan = session.generate_plan(plan_prompt(s));
                    json jp;
                    jp["id"] = id;
                    json steps = json::array();
                    for (const auto& [a, o] : session.plan_steps(plan)) steps.push_back({a, o});
                    jp["steps"] = std::move(steps);
                    jp["complete"] = plan.complete;
                    out += jp.dump() + "\n";
                }
            } else {
                if (ge_prompts.empty()) throw UsageError("text mode needs --prompts");
                for (const auto& [id, doc] : read_jsonl_objects(ge_prompts)) {
                    Transcript t = session.generate(doc.at("prompt").get<std::string>());
                    json jt = t.to_json();
                    jt["id"] = id;
                    out += jt.dump() + "\n";
                }
            }
            write_file(ge_out, out);
            std::cout << "decoded to " << ge_out << "\n";
            return 0;
        }

        // ---------------- eval ----------------
        if (eval->parsed()) {
            rc.reject_unknown();
            rc.echo("eval");
            if (ev_mode == "plan") {
                if (ev_scenarios.empty() || ev_transcripts.empty() || ev_vocab.empty())
                    throw UsageError("plan eval needs --scenarios, --transcripts and --vocab");
                ToolkenVocab vocab = load_vocab(ev_vocab);
                std::map<std::string, PlanScenario> scenarios;
                for (const auto& [id, doc] : read_jsonl_objects(ev_scenarios))
                    scenarios.emplace(id, scenario_from_json(doc));
                std::vector<PlanOutcome> outcomes;
                for (const auto& [id, doc] : read_jsonl_objects(ev_transcripts)) {
                    auto it = scenarios.find(id);
                    if (it == scenarios.end()) throw DataError("no scenario for id " + id);
                    std::vector<std::pair<std::string, std::string>> steps;
                    for (const auto& js : doc.at("steps"))
                        steps.emplace_back(js.at(0).get<std::string>(),
                                           js.at(1).get<std::string>());
                    outcomes.push_back(run_plan(it->second, steps, vocab));
                }
                PlanRates rates = score_plans(outcomes);
                json doc = {{"dataset", "plan"},
                            {"n", outcomes.size()},
                            {"metrics",
                             {{"grounding", rates.grounding},
                              {"executable", rates.executable},
                              {"success", rates.success},
                              {"success_relaxed", rates.success_relaxed}}}};
                if (!ev_out.empty()) write_file(ev_out, doc.dump(2) + "\n");
                std::printf("plan             n=%zu grounding=%.4f executable=%.4f "
                            "success=%.4f success_relaxed=%.4f\n",
                            outcomes.size(), rates.grounding, rates.executable, rates.success,
                            rates.success_relaxed);
                return 0;
            }

            if (ev_transcripts.empty() || ev_gold.empty())
                throw UsageError("eval needs --transcripts and --gold");
            std::map<std::string, json> gold;
            for (const auto& [id, doc] : read_jsonl_objects(ev_gold)) gold[id] = doc;
            EvalReport report;
            report.dataset = ev_mode;
            for (const auto& [id, doc] : read_jsonl_objects(ev_transcripts)) {
                auto it = gold.find(id);
                if (it == gold.end()) throw DataError("no gold answer for id " + id);
                Transcript t;
                t.prompt = doc.value("prompt", "");
                t.final_text = doc.at("final_text").get<std::string>();
                for (const auto& js : doc.at("segments")) {
                    Transcript::Segment seg;
                    if (js.contains("tool")) {
                        seg.is_call = true;
                        seg.call.call.tool = js.at("tool").get<std::string>();
                        seg.call.call.raw_args = js.value("args", "");
                        std::string status = js.value("status", "ok");
                        seg.call.call.status = status == "ok" ? CallStatus::Ok
                                               : status == "parse-error"
                                                   ? CallStatus::ParseError
                                                   : CallStatus::ExecError;
                        if (js.contains("result"))
                            seg.call.call.result = ToolResult{js.at("result").get<std::string>(),
                                                              std::nullopt};
                        seg.call.result_offset = js.value("result_offset", size_t(0));
                    } else {
                        seg.text = js.value("text", "");
                    }
                    t.segments.push_back(std::move(seg));
                }
                const std::string gold_tool = it->second.value("tool", "");
                EvalRecord rec;
                if (ev_mode == "kb") {
                    rec = score_kb_transcript(t, it->second.at("answer").get<std::string>(),
                                              gold_tool, id);
                } else {
                    NumericMode mode = ev_mode == "numeric-tolerance" ? NumericMode::Tolerance
                                                                      : NumericMode::Exact2dp;
                    rec = score_numeric_transcript(t, it->second.at("answer").get<double>(),
                                                   gold_tool, mode, id);
                }
                report.records.push_back(std::move(rec));
            }
            report.finalize();
            if (!ev_out.empty()) write_file(ev_out, report.to_json().dump(2) + "\n");
            std::cout << report.summary_line() << "\n";
            return 0;
        }

        // ---------------- inspect ----------------
        if (inspect->parsed()) {
            rc.reject_unknown();
            rc.echo("inspect");
            ToolkenEmbeddings emb = load_checkpoint(in_ckpt);
            std::cout << "hidden_dim: " << emb.hidden_dim << "\n";
            std::cout << "tools: " << emb.tool_count() << "\n";
            std::cout << "lm_fingerprint: " << hex_string(emb.lm_fingerprint) << "\n";
            std::vector<double> norms(emb.tool_count(), 0.0);
            for (size_t j = 0; j < emb.tool_count(); ++j) {
                double n2 = 0;
                for (float v : emb.row(j)) n2 += double(v) * double(v);
                norms[j] = std::sqrt(n2);
                std::printf("%3zu  %-24s |w| = %.4f\n", j, emb.tool_names[j].c_str(), norms[j]);
            }
            for (size_t j = 0; j < emb.tool_count(); ++j) {
                double best = -2.0;
                size_t best_k = j;
                for (size_t k = 0; k < emb.tool_count(); ++k) {
                    if (k == j || norms[j] == 0 || norms[k] == 0) continue;
                    double dot = 0;
                    for (uint32_t i = 0; i < emb.hidden_dim; ++i)
                        dot += double(emb.row(j)[i]) * double(emb.row(k)[i]);
                    double cos = dot / (norms[j] * norms[k]);
                    if (cos > best) {
                        best = cos;
                        best_k = k;
                    }
                }
                if (best_k != j)
                    std::printf("nearest(%s) = %s (cos %.4f)\n", emb.tool_names[j].c_str(),
                                emb.tool_names[best_k].c_str(), best);
            }
            return 0;
        }

        throw UsageError("no subcommand selected");
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const InternalError& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
