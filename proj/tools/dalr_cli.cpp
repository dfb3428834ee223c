// dalr: command-line front end for layer compression.
//
//   dalr stats     --acts X.dmat [--compare Y.dmat] --out rates.csv
//   dalr compress  --net network.json --layer I --method dalr --rank K --acts X.dmat --out DIR
//   dalr evaluate  --net network.json --inputs X.dmat [--labels L.dmat] [--reference ref.json] --out eval.json
//   dalr search    --net network.json --layers I,J --val-inputs X.dmat --val-labels L.dmat
//                  --acts-dir DIR --schedule 512,256,128:256,128 --max-drop 0.01 --out DIR
//
// Activation files hold X as n×p: one column per sample.
//
// Exit codes: 0 success, 2 usage, 3 data format, 4 numerical failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dalr/dalr.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int exit_usage = 2;
constexpr int exit_format = 3;
constexpr int exit_numerical = 4;

void write_text(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out)
        throw dalr::FormatError(dalr::FormatErrorCode::Io, 0, "cannot open " + path.string() + " for writing");
    out << text;
    if (!out)
        throw dalr::FormatError(dalr::FormatErrorCode::Io, 0, "write failed for " + path.string());
}

std::vector<std::size_t> parse_list(const std::string& text, const std::string& what)
{
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t pos = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != item.size() || item.front() == '-')
            throw dalr::UsageError(what + ": '" + item + "' is not a non-negative integer");
        out.push_back(static_cast<std::size_t>(v));
    }
    if (out.empty())
        throw dalr::UsageError(what + " is empty");
    return out;
}

dalr::RidgeConfig ridge_from(const std::optional<double>& lambda)
{
    if (!lambda)
        return {};
    if (!(*lambda >= 0.0))
        throw dalr::UsageError("--lambda must be non-negative");
    return dalr::RidgeConfig::fixed(*lambda);
}

// Forward pass in column blocks; calls fn(inputs_block, outputs_block).
template <typename Fn>
std::size_t forward_blocks(const dalr::Network& net, const fs::path& inputs, std::size_t block, Fn&& fn)
{
    std::size_t samples = 0;
    const std::size_t rows = dalr::io::for_each_column_block(inputs, block, [&](const dalr::DenseMatrix& x) {
        fn(x, dalr::forward(net, x), samples);
        samples += x.cols();
    });
    if (rows != net.input_dimension())
        throw dalr::DimensionError("inputs have " + std::to_string(rows) + " rows, network expects "
                                   + std::to_string(net.input_dimension()));
    return samples;
}

double streamed_accuracy(const dalr::Network& net, const fs::path& inputs, const std::vector<std::size_t>& labels,
                         std::size_t block)
{
    std::size_t hits = 0;
    const std::size_t p = forward_blocks(net, inputs, block,
                                         [&](const dalr::DenseMatrix&, const dalr::DenseMatrix& y, std::size_t off) {
                                             for (std::size_t j = 0; j < y.cols(); ++j) {
                                                 if (off + j >= labels.size())
                                                     continue;
                                                 const std::size_t label = labels[off + j];
                                                 if (label >= y.rows())
                                                     throw dalr::RangeError("label " + std::to_string(label)
                                                                            + " outside " + std::to_string(y.rows())
                                                                            + " classes");
                                                 hits += dalr::argmax_column(y, j) == label;
                                             }
                                         });
    if (p != labels.size())
        throw dalr::BatchError("inputs have " + std::to_string(p) + " samples but labels have "
                               + std::to_string(labels.size()));
    if (p == 0)
        throw dalr::BatchError("evaluation batch is empty");
    return static_cast<double>(hits) / static_cast<double>(p);
}

// ---- stats ----------------------------------------------------------------

struct StatsArgs {
    std::string acts, compare, out, summary;
    double threshold = 0.0;
    std::size_t block = dalr::io::default_block_columns;
};

dalr::ActivationProfile stream_profile(const fs::path& path, double threshold, std::size_t block)
{
    dalr::io::ColumnBlockReader reader(path);
    dalr::RateCounter counter(reader.rows(), threshold);
    dalr::io::for_each_column_block(path, block, [&](const dalr::DenseMatrix& b) { counter.add(b); });
    return counter.profile();
}

int run_stats(const StatsArgs& a)
{
    const auto source = stream_profile(a.acts, a.threshold, a.block);
    json summary;
    if (a.compare.empty()) {
        write_text(a.out, dalr::report::profile_csv(source));
        summary = dalr::report::profile_summary(source);
    } else {
        const auto target = stream_profile(a.compare, a.threshold, a.block);
        const auto skew = dalr::compare_profiles(source, target);
        write_text(a.out, dalr::report::skew_csv(skew));
        summary = dalr::report::skew_summary(skew);
    }
    const std::string text = summary.dump(2) + "\n";
    if (!a.summary.empty())
        write_text(a.summary, text);
    std::cout << text;
    return 0;
}

// ---- compress -------------------------------------------------------------

struct CompressArgs {
    std::string net, method, acts, heldout, eval_inputs, eval_labels, out;
    std::size_t layer = 0;
    std::size_t rank = 0;
    std::optional<double> lambda;
    bool compensate_bias = false;
    std::size_t block = dalr::io::default_block_columns;
};

// ε² accumulated over column blocks; `approx` maps a block to the compressed layer's outputs.
template <typename Approx>
double streamed_error(const dalr::LinearLayer& layer, const fs::path& path, std::size_t block, Approx&& approx)
{
    double sq = 0.0;
    const std::size_t rows = dalr::io::for_each_column_block(path, block, [&](const dalr::DenseMatrix& x) {
        if (x.rows() != layer.inputs())
            throw dalr::DimensionError("error batch " + x.shape() + " does not match layer "
                                       + layer.weights().shape());
        const double e = dalr::reconstruction_error(layer.apply(x), approx(x));
        sq += e * e;
    });
    if (rows != layer.inputs())
        throw dalr::DimensionError("error batch has " + std::to_string(rows) + " rows, layer expects "
                                   + std::to_string(layer.inputs()));
    return std::sqrt(sq);
}

int run_compress(const CompressArgs& a)
{
    const auto started = std::chrono::steady_clock::now();
    const dalr::Network net = dalr::io::load_network(a.net);
    if (a.layer >= net.size())
        throw dalr::RangeError("--layer " + std::to_string(a.layer) + " outside network of "
                               + std::to_string(net.size()) + " layers");
    const dalr::LinearLayer& layer = net.layer(a.layer);
    const std::size_t m = layer.outputs(), n = layer.inputs();

    const bool prune = a.method == "prune-mean" || a.method == "prune-max";
    if (!prune && a.method != "svd" && a.method != "svd-bc" && a.method != "dalr")
        throw dalr::UsageError("unknown method '" + a.method + "'");
    if (a.method != "svd" && a.acts.empty())
        throw dalr::UsageError("method " + a.method + " needs --acts");
    if (a.eval_inputs.empty() != a.eval_labels.empty())
        throw dalr::UsageError("--eval-inputs and --eval-labels go together");
    dalr::check_rank(m, n, a.rank);
    if ((m + n) * a.rank >= m * n)
        std::cerr << "warning: rank " << a.rank << " keeps (m+n)k = " << (m + n) * a.rank
                  << " >= mn = " << m * n << " parameters; no compression\n";

    fs::create_directories(a.out);
    dalr::report::CompressionReport rep;
    rep.method = a.method;
    rep.layer = a.layer;
    rep.rank = a.rank;
    rep.parameter_fraction = dalr::parameter_fraction(m, n, a.rank);

    dalr::Network result = net;
    std::function<dalr::DenseMatrix(const dalr::DenseMatrix&)> approx;

    if (prune) {
        dalr::PruneScorer scorer(layer);
        dalr::io::for_each_column_block(a.acts, a.block, [&](const dalr::DenseMatrix& x) { scorer.add(x); });
        const auto kind = a.method == "prune-mean" ? dalr::PruneScore::Mean : dalr::PruneScore::Max;
        const std::size_t keep = dalr::pruning_budget(m, n, a.rank);
        const dalr::PruneResult pr = dalr::prune_units(layer, dalr::top_units(scorer.scores(kind), keep));
        result = dalr::apply_pruning(net, a.layer, pr);
        dalr::io::write_matrix(fs::path(a.out) / "pruned.weights.dmat", pr.layer.weights());
        dalr::io::write_matrix(fs::path(a.out) / "pruned.bias.dmat", dalr::DenseMatrix::row(pr.layer.bias()));
        dalr::io::write_labels(fs::path(a.out) / "kept.dmat", pr.kept);
        // Removed units contribute nothing downstream: compare with their rows zeroed.
        approx = [&layer, pr](const dalr::DenseMatrix& x) {
            const dalr::DenseMatrix kept = pr.layer.apply(x);
            dalr::DenseMatrix y(layer.outputs(), x.cols());
            for (std::size_t r = 0; r < pr.kept.size(); ++r)
                for (std::size_t j = 0; j < x.cols(); ++j)
                    y(pr.kept[r], j) = kept(r, j);
            return y;
        };
    } else {
        dalr::FactorPair pair;
        if (a.method == "svd") {
            pair = dalr::svd_truncate(layer, a.rank);
        } else if (a.method == "svd-bc") {
            std::vector<double> sum(n, 0.0);
            std::size_t p = 0;
            dalr::io::for_each_column_block(a.acts, a.block, [&](const dalr::DenseMatrix& x) {
                if (x.rows() != n)
                    throw dalr::DimensionError("activations " + x.shape() + " do not match layer "
                                               + layer.weights().shape());
                for (std::size_t i = 0; i < n; ++i)
                    for (double v : x.row_span(i))
                        sum[i] += v;
                p += x.cols();
            });
            if (p == 0)
                throw dalr::BatchError("activation batch is empty");
            for (auto& v : sum)
                v /= static_cast<double>(p);
            pair = dalr::bias_compensate(layer, dalr::svd_truncate(layer, a.rank), sum);
        } else {
            dalr::GramAccumulator stats(n);
            const std::size_t rows = dalr::io::for_each_column_block(
                a.acts, a.block, [&](const dalr::DenseMatrix& x) { stats.add(x); });
            if (rows != n)
                throw dalr::DimensionError("activations have " + std::to_string(rows) + " rows, layer expects "
                                           + std::to_string(n));
            pair = dalr::dalr_compress(layer, stats, a.rank, ridge_from(a.lambda),
                                       dalr::DalrOptions{a.compensate_bias});
        }
        rep.lambda = pair.lambda;
        result = dalr::splice(net, a.layer, pair);
        dalr::io::write_matrix(fs::path(a.out) / "factor_a.dmat", pair.a);
        dalr::io::write_matrix(fs::path(a.out) / "factor_b.dmat", pair.b);
        dalr::io::write_matrix(fs::path(a.out) / "bias.dmat", dalr::DenseMatrix::row(pair.new_bias));
        approx = [pair](const dalr::DenseMatrix& x) { return pair.apply(x); };
    }

    if (!a.heldout.empty()) {
        rep.error = streamed_error(layer, a.heldout, a.block, approx);
        rep.error_batch = "heldout";
    } else if (!a.acts.empty()) {
        rep.error = streamed_error(layer, a.acts, a.block, approx);
        rep.error_batch = "acts";
    } else {
        const dalr::DenseMatrix eye = dalr::DenseMatrix::identity(n);
        rep.error = dalr::reconstruction_error(layer.apply(eye), approx(eye));
        rep.error_batch = "identity";
    }

    if (!a.eval_inputs.empty()) {
        const auto labels = dalr::io::read_labels(a.eval_labels);
        rep.accuracy_before = streamed_accuracy(net, a.eval_inputs, labels, a.block);
        rep.accuracy_after = streamed_accuracy(result, a.eval_inputs, labels, a.block);
    }

    dalr::io::save_network(result, fs::path(a.out) / "network.json");
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    const std::string text = dalr::report::to_json(rep).dump(2) + "\n";
    write_text(fs::path(a.out) / "report.json", text);
    std::cout << text;
    return 0;
}

// ---- evaluate -------------------------------------------------------------

struct EvaluateArgs {
    std::string net, inputs, labels, reference, out;
    std::size_t block = dalr::io::default_block_columns;
};

int run_evaluate(const EvaluateArgs& a)
{
    const dalr::Network net = dalr::io::load_network(a.net);
    json j;
    j["parameters"] = net.parameter_count();
    j["layers"] = net.size();

    std::optional<dalr::Network> reference;
    if (!a.reference.empty()) {
        reference = dalr::io::load_network(a.reference);
        if (reference->input_dimension() != net.input_dimension() || reference->output_dimension() != net.output_dimension())
            throw dalr::DimensionError("reference network shape does not match");
    }
    double sq_err = 0.0, sq_ref = 0.0;
    const std::size_t p = forward_blocks(net, a.inputs, a.block,
                                         [&](const dalr::DenseMatrix& x, const dalr::DenseMatrix& y, std::size_t) {
                                             if (!reference)
                                                 return;
                                             const dalr::DenseMatrix r = dalr::forward(*reference, x);
                                             sq_err += dalr::frobenius_norm_squared(dalr::subtract(r, y));
                                             sq_ref += dalr::frobenius_norm_squared(r);
                                         });
    if (p == 0)
        throw dalr::BatchError("input batch is empty");
    j["samples"] = p;
    if (reference) {
        j["reference_parameters"] = reference->parameter_count();
        j["reconstruction_error"] = std::sqrt(sq_err);
        j["relative_error"] = sq_ref > 0.0 ? std::sqrt(sq_err / sq_ref) : 0.0;
    }
    if (!a.labels.empty()) {
        const auto labels = dalr::io::read_labels(a.labels);
        j["accuracy"] = streamed_accuracy(net, a.inputs, labels, a.block);
        if (reference)
            j["reference_accuracy"] = streamed_accuracy(*reference, a.inputs, labels, a.block);
    }
    const std::string text = j.dump(2) + "\n";
    write_text(a.out, text);
    std::cout << text;
    return 0;
}

// ---- search ---------------------------------------------------------------

struct SearchArgs {
    std::string net, layers, val_inputs, val_labels, acts_dir, schedule, method = "dalr", train_inputs, out;
    double max_drop = 0.01;
    std::optional<double> lambda;
    bool relative = false;
};

int run_search(const SearchArgs& a)
{
    const dalr::Network net = dalr::io::load_network(a.net);
    const auto layers = parse_list(a.layers, "--layers");
    if (layers.size() != 2)
        throw dalr::UsageError("--layers takes exactly two indices, as I,J");
    const auto colon = a.schedule.find(':');
    if (colon == std::string::npos)
        throw dalr::UsageError("--schedule must look like 'a1,a2,...:b1,b2,...'");

    dalr::SearchConfig cfg;
    cfg.schedule_a = parse_list(a.schedule.substr(0, colon), "--schedule (first layer)");
    cfg.schedule_b = parse_list(a.schedule.substr(colon + 1), "--schedule (second layer)");
    cfg.max_drop = a.max_drop;
    cfg.method = dalr::parse_method(a.method);
    cfg.ridge = ridge_from(a.lambda);
    cfg.relative_to_previous = a.relative;

    for (std::size_t l : layers)
        if (l >= net.size())
            throw dalr::RangeError("layer " + std::to_string(l) + " outside network of "
                                   + std::to_string(net.size()) + " layers");
    auto acts_for = [&](std::size_t l) {
        return dalr::ActivationBatch(dalr::io::read_matrix(fs::path(a.acts_dir) / ("layer" + std::to_string(l) + ".dmat")));
    };
    const auto acts_a = acts_for(layers[0]);
    const auto acts_b = acts_for(layers[1]);
    const dalr::LabeledBatch val(dalr::io::read_matrix(a.val_inputs), dalr::io::read_labels(a.val_labels));

    std::optional<dalr::DenseMatrix> train;
    if (!a.train_inputs.empty()) {
        train = dalr::io::read_matrix(a.train_inputs);
        cfg.reextract_activations = true;
    }
    const auto trace = dalr::joint_rank_search(net, layers[0], layers[1], val, acts_a, acts_b, cfg,
                                               train ? &*train : nullptr);

    fs::create_directories(a.out);
    write_text(fs::path(a.out) / "trace.jsonl", dalr::report::trace_jsonl(trace));
    write_text(fs::path(a.out) / "summary.csv", dalr::report::trace_summary_csv(trace));
    // The final network with both layers at their chosen ranks.
    dalr::Network final_net = net;
    if (!cfg.reextract_activations) {
        final_net = dalr::compress_two(net, layers[0], trace.final_rank_a, layers[1], trace.final_rank_b, acts_a,
                                       acts_b, cfg.method, cfg.ridge);
    } else {
        // Each layer re-fitted on activations of the network with only the other layer compressed.
        const auto pa0 = dalr::compress_layer(net.layer(layers[0]), acts_a, trace.final_rank_a, cfg.method, cfg.ridge);
        const auto pb0 = dalr::compress_layer(net.layer(layers[1]), acts_b, trace.final_rank_b, cfg.method, cfg.ridge);
        auto refit = [&](std::size_t self, std::size_t other, const dalr::FactorPair& other_pair, std::size_t rank) {
            const dalr::Network partial = dalr::splice(net, other, other_pair);
            const std::size_t pos = other < self ? self + 1 : self;
            return dalr::compress_layer(net.layer(self), dalr::extract_activations(partial, *train, pos), rank,
                                        cfg.method, cfg.ridge);
        };
        final_net = dalr::splice_two(net, layers[0], refit(layers[0], layers[1], pb0, trace.final_rank_a), layers[1],
                                     refit(layers[1], layers[0], pa0, trace.final_rank_b));
    }
    dalr::io::save_network(final_net, fs::path(a.out) / "network.json");

    json j;
    j["final_rank_a"] = trace.final_rank_a;
    j["final_rank_b"] = trace.final_rank_b;
    j["baseline_accuracy"] = trace.baseline_accuracy;
    j["final_accuracy"] = trace.final_accuracy;
    j["reduction_total"] = trace.reduction_total;
    j["steps"] = trace.steps.size();
    j["stop_reason"] = trace.stop_reason;
    std::cout << j.dump(2) << "\n";
    return 0;
}

int exit_code_for(const std::exception& e)
{
    if (dynamic_cast<const dalr::UsageError*>(&e) || dynamic_cast<const dalr::RankError*>(&e)
        || dynamic_cast<const dalr::RangeError*>(&e))
        return exit_usage;
    if (dynamic_cast<const dalr::DecompositionError*>(&e) || dynamic_cast<const dalr::SingularSystemError*>(&e)
        || dynamic_cast<const dalr::NumericalError*>(&e))
        return exit_numerical;
    return exit_format;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Low-rank compression of fully connected layers"};
    app.require_subcommand(1);

    StatsArgs sa;
    auto* stats = app.add_subcommand("stats", "Activation rates and half-mass fraction of an activation batch");
    stats->add_option("--acts", sa.acts, "Activation batch (n x p)")->required();
    stats->add_option("--compare", sa.compare, "Second batch; writes the rate-skew comparison instead");
    stats->add_option("--out", sa.out, "CSV output")->required();
    stats->add_option("--summary", sa.summary, "Also write the JSON summary here");
    stats->add_option("--threshold", sa.threshold, "Count a response as active above this value")
        ->capture_default_str();
    stats->add_option("--block", sa.block, "Columns per streamed block")->capture_default_str();

    CompressArgs ca;
    auto* compress = app.add_subcommand("compress", "Compress one layer of a network");
    compress->add_option("--net", ca.net, "Network manifest")->required();
    compress->add_option("--layer", ca.layer, "Layer index")->required();
    compress->add_option("--method", ca.method, "svd | svd-bc | dalr | prune-mean | prune-max")->required();
    compress->add_option("--rank", ca.rank, "Target rank k (pruning keeps the matching unit budget)")->required();
    compress->add_option("--lambda", ca.lambda, "Ridge strength for dalr (default: scaled to the trace of X X^T)");
    compress->add_flag("--compensate-bias", ca.compensate_bias, "Apply mean bias compensation after dalr");
    compress->add_option("--acts", ca.acts, "Layer-input activations (n x p)");
    compress->add_option("--heldout", ca.heldout, "Batch for the reconstruction error (default: --acts)");
    compress->add_option("--eval-inputs", ca.eval_inputs, "Network inputs for accuracy before/after");
    compress->add_option("--eval-labels", ca.eval_labels, "Labels for --eval-inputs");
    compress->add_option("--block", ca.block, "Columns per streamed block")->capture_default_str();
    compress->add_option("--out", ca.out, "Output directory")->required();

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "Accuracy and output error of a network");
    evaluate->add_option("--net", ea.net, "Network manifest")->required();
    evaluate->add_option("--inputs", ea.inputs, "Network inputs (n x p)")->required();
    evaluate->add_option("--labels", ea.labels, "Class labels");
    evaluate->add_option("--reference", ea.reference, "Manifest of the network to compare outputs against");
    evaluate->add_option("--block", ea.block, "Columns per streamed block")->capture_default_str();
    evaluate->add_option("--out", ea.out, "JSON output")->required();

    SearchArgs ra;
    auto* search = app.add_subcommand("search", "Greedy joint rank search over two layers");
    search->add_option("--net", ra.net, "Network manifest")->required();
    search->add_option("--layers", ra.layers, "Two layer indices, I,J")->required();
    search->add_option("--val-inputs", ra.val_inputs, "Validation inputs")->required();
    search->add_option("--val-labels", ra.val_labels, "Validation labels")->required();
    search->add_option("--acts-dir", ra.acts_dir, "Directory holding layer<I>.dmat activation batches")->required();
    search->add_option("--schedule", ra.schedule, "Descending ranks per layer, as a1,a2,...:b1,b2,...")->required();
    search->add_option("--max-drop", ra.max_drop, "Largest tolerated accuracy drop")->capture_default_str();
    search->add_option("--method", ra.method, "svd | svd-bc | dalr")->capture_default_str();
    search->add_option("--lambda", ra.lambda, "Ridge strength for dalr");
    search->add_flag("--relative", ra.relative, "Measure the drop against the previous step");
    search->add_option("--train-inputs", ra.train_inputs,
                       "Network inputs; re-extracts each layer's activations with the other compressed");
    search->add_option("--out", ra.out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (*stats)
            return run_stats(sa);
        if (*compress)
            return run_compress(ca);
        if (*evaluate)
            return run_evaluate(ea);
        return run_search(ra);
    } catch (const dalr::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_format;
    } catch (const dalr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_format;
    }
}
