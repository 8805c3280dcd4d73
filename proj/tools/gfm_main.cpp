#include <CLI11.hpp>

#include <iostream>

#include "gfm/decoder.hpp"
#include "gfm/harness.hpp"
#include "gfm/trainer.hpp"
#include "gfm/walker.hpp"

using namespace gfm;

namespace {

Graph graph_from_flags(const std::string& file, const std::string& generator, int nodes,
                       std::uint64_t seed) {
    if (!generator.empty()) {
        if (generator == "sim") return generate_simulation_graph(seed, nodes);
        if (generator == "proxy") return generate_proxy_graph(seed, nodes);
        throw std::invalid_argument("unknown generator: " + generator);
    }
    if (file.empty()) throw std::invalid_argument("need --graph or --generator");
    return load_edge_list_file(file);
}

std::vector<int> parse_id_list(const std::string& csv) {
    std::vector<int> out;
    std::istringstream in(csv);
    std::string item;
    while (std::getline(in, item, ','))
        if (!item.empty()) out.push_back(std::stoi(item));
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"gfm: graph foundation model pipeline"};
    app.require_subcommand(1);

    // shared graph flags
    std::string graph_file, generator;
    int nodes = 20;
    std::uint64_t graph_seed = 42;
    auto add_graph_flags = [&](CLI::App* cmd) {
        cmd->add_option("--graph", graph_file, "edge-list graph file");
        cmd->add_option("--generator", generator, "sim | proxy (instead of --graph)");
        cmd->add_option("--nodes", nodes, "generator node count");
        cmd->add_option("--graph-seed", graph_seed, "generator seed");
    };

    // gen-graph
    auto* gen = app.add_subcommand("gen-graph", "generate a seeded graph");
    std::string gen_out;
    add_graph_flags(gen);
    gen->add_option("--out", gen_out, "output edge-list file")->required();

    // walk
    auto* walk = app.add_subcommand("walk", "sample a biased random-walk corpus");
    std::string walk_out;
    WalkConfig wcfg;
    add_graph_flags(walk);
    walk->add_option("--out", walk_out, "output corpus file")->required();
    walk->add_option("--beta", wcfg.beta, "softmax sharpness");
    walk->add_option("--p", wcfg.p, "backtrack penalty");
    walk->add_option("--q", wcfg.q, "in-out penalty");
    walk->add_option("--length", wcfg.walk_length, "walk length T");
    walk->add_option("--walks-per-node", wcfg.walks_per_node, "walks per start node");
    walk->add_option("--seed", wcfg.rng_seed, "corpus seed");

    // curriculum
    auto* cur = app.add_subcommand("curriculum", "build the progressive mask dataset");
    std::string cur_corpus, cur_out;
    CurriculumConfig ccfg;
    std::uint64_t cur_seed = 0;
    add_graph_flags(cur);
    cur->add_option("--corpus", cur_corpus, "walk corpus file")->required();
    cur->add_option("--out", cur_out, "output dataset file")->required();
    cur->add_option("--l-min", ccfg.l_min, "minimum level count");
    cur->add_option("--l-max", ccfg.l_max, "maximum level count");
    cur->add_option("--extra-mask-prob", ccfg.extra_mask_prob, "extra interior mask probability");
    cur->add_flag("--random-anchor", ccfg.random_anchor, "uniform anchor placement");
    cur->add_option("--seed", cur_seed, "dataset seed");

    // train
    auto* train_cmd = app.add_subcommand("train", "train the encoder on a dataset");
    std::string train_dataset, train_out, train_trace, train_ckpt_dir, train_resume;
    ModelConfig mcfg;
    mcfg.layers = 6;
    mcfg.heads = 6;
    mcfg.embed_dim = 192;
    mcfg.max_seq_len = 12;
    mcfg.dropout = 0.1;
    TrainConfig tcfg;
    tcfg.total_steps = 15000;
    add_graph_flags(train_cmd);
    train_cmd->add_option("--dataset", train_dataset, "curriculum dataset file")->required();
    train_cmd->add_option("--out", train_out, "output checkpoint file")->required();
    train_cmd->add_option("--trace", train_trace, "loss trace CSV file");
    train_cmd->add_option("--layers", mcfg.layers, "encoder layers");
    train_cmd->add_option("--heads", mcfg.heads, "attention heads");
    train_cmd->add_option("--dim", mcfg.embed_dim, "embedding width");
    train_cmd->add_option("--ffn-dim", mcfg.ffn_dim, "FFN width (-1: 4x dim)");
    train_cmd->add_option("--max-seq", mcfg.max_seq_len, "maximum sequence length");
    train_cmd->add_option("--dropout", mcfg.dropout, "dropout rate");
    train_cmd->add_option("--steps", tcfg.total_steps, "optimization steps");
    train_cmd->add_option("--batch", tcfg.batch_size, "batch size");
    train_cmd->add_option("--lr", tcfg.learning_rate, "learning rate");
    train_cmd->add_option("--seed", tcfg.rng_seed, "training seed");
    train_cmd->add_option("--checkpoint-every", tcfg.checkpoint_every, "periodic checkpoint step");
    train_cmd->add_option("--checkpoint-dir", train_ckpt_dir, "periodic checkpoint directory");
    train_cmd->add_option("--resume", train_resume, "resume from a train-state file");
    train_cmd->add_flag("--staged", tcfg.staged, "level-1 warmup for the first third");

    // decode
    auto* dec = app.add_subcommand("decode", "solve one task instance with a checkpoint");
    std::string dec_ckpt, dec_kind = "sp", dec_required, dec_mode = "beam";
    int dec_source = 0, dec_target = -1;
    DecodeConfig dcfg;
    add_graph_flags(dec);
    dec->add_option("--checkpoint", dec_ckpt, "GFM1 checkpoint")->required();
    dec->add_option("--kind", dec_kind, "sp | gtsp | tpsod | tpdod");
    dec->add_option("--source", dec_source, "source / depot node");
    dec->add_option("--target", dec_target, "target / destination node");
    dec->add_option("--required", dec_required, "comma-separated required nodes");
    dec->add_option("--beam-width", dcfg.beam_width, "beam width");
    dec->add_option("--temperature", dcfg.temperature, "softmax temperature");
    dec->add_option("--max-walk-length", dcfg.max_walk_length, "walk length cap");
    dec->add_option("--lambda", dcfg.blend_lambda, "model weight in insertion score");
    dec->add_option("--mode", dec_mode, "greedy | beam | sample");
    dec->add_option("--seed", dcfg.rng_seed, "sampling seed");

    // bench / eval
    auto* bench = app.add_subcommand("bench", "run a benchmark config");
    std::string bench_config, bench_outdir;
    bench->add_option("--config", bench_config, "key=value experiment config")->required();
    bench->add_option("--output-dir", bench_outdir, "override output directory");

    auto* eval = app.add_subcommand("eval", "benchmark with gaps vs the first (reference) method");
    std::string eval_config, eval_outdir;
    eval->add_option("--config", eval_config, "key=value experiment config")->required();
    eval->add_option("--output-dir", eval_outdir, "override output directory");

    CLI11_PARSE(app, argc, argv); // usage errors exit 1

    try {
        if (gen->parsed()) {
            Graph g = graph_from_flags(graph_file, generator.empty() ? "sim" : generator, nodes,
                                       graph_seed);
            save_edge_list_file(g, gen_out);
            GraphStats st = stats(g);
            std::cout << "wrote " << gen_out << ": " << st.node_count << " nodes, "
                      << st.edge_count << " edges, avg degree " << st.avg_degree << "\n";
        } else if (walk->parsed()) {
            Graph g = graph_from_flags(graph_file, generator, nodes, graph_seed);
            auto corpus = generate_corpus(g, wcfg);
            save_corpus_file(corpus, g, wcfg, walk_out);
            std::cout << "wrote " << walk_out << ": " << corpus.size() << " walks of length "
                      << wcfg.walk_length << "\n";
        } else if (cur->parsed()) {
            Graph g = graph_from_flags(graph_file, generator, nodes, graph_seed);
            auto corpus = load_corpus_file(cur_corpus);
            auto dataset = build_dataset(corpus, ccfg, cur_seed);
            Vocab vocab{g.node_count()};
            std::uint64_t corpus_hash = fnv1a64(cur_corpus.data(), cur_corpus.size());
            save_dataset_file(dataset, vocab, ccfg, corpus_hash, cur_out);
            std::cout << "wrote " << cur_out << ": " << dataset.size() << " samples from "
                      << corpus.size() << " walks\n";
        } else if (train_cmd->parsed()) {
            Graph g = graph_from_flags(graph_file, generator, nodes, graph_seed);
            Vocab vocab{g.node_count()};
            auto dataset = load_dataset_file(train_dataset, vocab);
            mcfg.vocab_size = vocab.size();
            std::optional<TrainState<float>> resume;
            if (!train_resume.empty()) resume = load_train_state<float>(train_resume);
            auto result = train<float>(dataset, vocab, mcfg, tcfg, train_ckpt_dir,
                                       resume ? &*resume : nullptr);
            save_checkpoint(result.state.params, train_out);
            if (!train_trace.empty()) {
                std::ofstream f(train_trace);
                f << trace_to_csv(result.trace);
            }
            const double last = result.trace.empty() ? 0.0 : result.trace.back().loss;
            std::cout << "wrote " << train_out << " after " << result.state.step
                      << " steps, final loss " << last << "\n";
        } else if (dec->parsed()) {
            Graph g = graph_from_flags(graph_file, generator, nodes, graph_seed);
            auto params = load_checkpoint<float>(dec_ckpt);
            TaskSpec spec;
            spec.kind = task_kind_from_string(dec_kind);
            spec.source = dec_source;
            spec.target = dec_target;
            spec.required = parse_id_list(dec_required);
            if (dec_mode == "greedy") dcfg.mode = DecodeMode::Greedy;
            else if (dec_mode == "beam") dcfg.mode = DecodeMode::Beam;
            else if (dec_mode == "sample") dcfg.mode = DecodeMode::Sample;
            else throw std::invalid_argument("unknown mode: " + dec_mode);
            Solution sol = decode(params, g, spec, dcfg);
            std::cout << "kind,source,target,required,objective_km,feasible,runtime_s,walk\n"
                      << solution_csv_row(spec, sol) << "\n";
        } else if (bench->parsed() || eval->parsed()) {
            ExperimentConfig cfg =
                load_experiment_config(bench->parsed() ? bench_config : eval_config);
            const std::string& outdir = bench->parsed() ? bench_outdir : eval_outdir;
            if (!outdir.empty()) cfg.output_dir = outdir;
            RunOutput out = run(cfg);
            std::cout << out.markdown;
            if (eval->parsed() && out.rows.size() > 1) {
                const ResultRow& ref = out.rows.front();
                std::cout << "\n| Method | Gap vs " << ref.method << " (%) |\n|---|---|\n";
                for (std::size_t i = 1; i < out.rows.size(); ++i) {
                    const ResultRow& r = out.rows[i];
                    if (r.success_rate > 0.0 && ref.mean_objective_km > 0.0)
                        std::cout << "| " << r.method << " | " << std::fixed
                                  << std::setprecision(2)
                                  << 100.0 * (r.mean_objective_km / ref.mean_objective_km - 1.0)
                                  << " |\n";
                    else
                        std::cout << "| " << r.method << " | -- |\n";
                }
            }
        }
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
