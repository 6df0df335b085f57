// icp: pack and inspect image stores, run feature jobs, serve dispatch
// requests and run the benchmark protocols.

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <thread>

#include "icp/bench.hpp"
#include "icp/bigimage.hpp"
#include "icp/engine.hpp"
#include "icp/error.hpp"
#include "icp/server.hpp"
#include "icp/synth.hpp"

namespace fs = std::filesystem;
using namespace icp;

namespace {

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const std::string item = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        std::size_t used = 0;
        unsigned long long v = 0;
        try {
            v = std::stoull(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (item.empty() || used != item.size() || v == 0) {
            throw Error(ErrorCode::InvalidArgument, "bad list item '" + item + "'");
        }
        out.push_back(static_cast<std::size_t>(v));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

void emit(const bench::BenchReport& report, const std::string& out) {
    if (out.empty() || out == "-") {
        std::cout << report.to_csv();
    } else {
        report.write(out);
        std::cerr << "wrote " << out << "\n";
    }
}

std::vector<dicp::UploadImage> upload_dataset(const std::string& dir, std::size_t n, std::uint64_t seed) {
    std::vector<dicp::UploadImage> out;
    if (!dir.empty()) {
        std::vector<fs::path> files;
        for (const auto& e : fs::directory_iterator(dir)) {
            if (e.is_regular_file()) files.push_back(e.path());
        }
        std::sort(files.begin(), files.end());
        if (files.size() < n) {
            throw Error(ErrorCode::InsufficientFiles,
                        dir + " holds " + std::to_string(files.size()) + " files, " + std::to_string(n) + " needed");
        }
        for (std::size_t i = 0; i < n; ++i) {
            auto img = decode_pnm(io::read_file(files[i]), files[i].stem().string());
            std::string ext = files[i].extension().string();
            if (!ext.empty()) ext.erase(0, 1);
            out.push_back(dicp::make_upload(img, files[i].stem().string(), ext.empty() ? "pgm" : ext));
        }
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const std::string stem = "img_" + std::to_string(i);
        out.push_back(dicp::make_upload(PImage{stem, synth::value_noise(64, 64, seed + i)}, stem, "pgm"));
    }
    return out;
}

// Either connects to --server or starts a private in-process service.
struct Target {
    std::unique_ptr<dicp::DicpService> service;
    std::unique_ptr<dicp::DicpServer> server;
    dicp::Endpoint endpoint;

    Target(const std::string& address, const std::string& algorithm) {
        if (!address.empty()) {
            endpoint = dicp::Endpoint::parse(address);
            return;
        }
        auto config = dicp::parse_match_config("* pgm " + algorithm + "\n* ppm " + algorithm + "\n");
        service = std::make_unique<dicp::DicpService>(std::move(config));
        server = std::make_unique<dicp::DicpServer>(*service);
        server->start();
        endpoint = server->endpoint();
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Packed image storage, feature jobs and request dispatch"};
    app.require_subcommand(1);

    // pack
    std::string pack_dir, pack_out = ".", pack_name = "store";
    std::uint64_t pack_threshold = kUnlimitedThreshold;
    auto* pack = app.add_subcommand("pack", "Pack a directory of PNM files into a store");
    pack->add_option("dir", pack_dir, "Input directory")->required();
    pack->add_option("-o,--out", pack_out, "Output directory");
    pack->add_option("-n,--name", pack_name, "Store name");
    pack->add_option("-t,--threshold", pack_threshold, "Maximum data bytes per store before rollover");

    // inspect
    std::string inspect_store;
    bool inspect_quiet = false;
    auto* inspect = app.add_subcommand("inspect", "List and verify a store");
    inspect->add_option("store", inspect_store, "Store path (either file, or the common prefix)")->required();
    inspect->add_flag("-q,--quiet", inspect_quiet, "Only verify");

    // run
    std::string run_store, run_algorithm = "harris", run_alpha = "all", run_out = "features.csv", run_desc;
    std::uint64_t run_blocksize = 64 * 1024;
    std::size_t run_workers = 1;
    auto* run = app.add_subcommand("run", "Partition, map and reduce a store");
    run->add_option("store", run_store, "Store path")->required();
    run->add_option("-b,--blocksize", run_blocksize, "Bytes per group")->check(CLI::PositiveNumber);
    run->add_option("-a,--algorithm", run_algorithm, "harris or sift");
    run->add_option("--alpha", run_alpha, "all | single:<k> | custom:<a1,a2,...>");
    run->add_option("-w,--workers", run_workers, "Concurrent map tasks")->check(CLI::PositiveNumber);
    run->add_option("-o,--out", run_out, "Feature CSV path");
    run->add_option("--descriptors", run_desc, "Descriptor file path (default: <out>.desc)");

    // serve
    std::string serve_listen = "127.0.0.1:7070", serve_config, serve_staging;
    std::size_t serve_inflight = 64;
    double serve_duration = 0;
    auto* serve = app.add_subcommand("serve", "Run the dispatch service");
    serve->add_option("-l,--listen", serve_listen, "host:port");
    serve->add_option("-c,--config", serve_config, "Matching rules file")->required();
    serve->add_option("--max-inflight", serve_inflight, "Concurrent algorithm runs")->check(CLI::PositiveNumber);
    serve->add_option("--staging", serve_staging, "Save the staging store here on exit (path prefix)");
    serve->add_option("--duration", serve_duration, "Seconds to serve; 0 runs until interrupted");

    // bench-input
    std::string bi_dir, bi_work, bi_sizes = "100,500,1000,5000,10000", bi_out;
    std::size_t bi_runs = 3;
    bool bi_generate = false;
    auto* bench_input = app.add_subcommand("bench-input", "Loose files versus packed store input time");
    bench_input->add_option("dir", bi_dir, "Directory of same-resolution PNM files")->required();
    bench_input->add_option("--sizes", bi_sizes, "Comma separated file counts");
    bench_input->add_option("--runs", bi_runs, "Repetitions per size (median reported)")->check(CLI::PositiveNumber);
    bench_input->add_option("--work-dir", bi_work, "Where the packed stores go (default: <dir>.stores)");
    bench_input->add_flag("--generate", bi_generate, "Fill dir with synthetic 64x64 PGMs first if it is short");
    bench_input->add_option("-o,--out", bi_out, "Report path (default: stdout)");

    // bench-scaling
    std::string bs_store, bs_algorithm = "sift", bs_workers = "1,2,4,8", bs_out;
    std::size_t bs_synthetic = 0, bs_runs = 1;
    std::uint64_t bs_blocksize = 0;
    auto* bench_scaling = app.add_subcommand("bench-scaling", "Wall time against worker count");
    bench_scaling->add_option("--store", bs_store, "Store path");
    bench_scaling->add_option("--synthetic", bs_synthetic, "Generate this many 256x256 textures instead");
    bench_scaling->add_option("-a,--algorithm", bs_algorithm, "harris or sift");
    bench_scaling->add_option("-w,--workers", bs_workers, "Comma separated worker counts");
    bench_scaling->add_option("-b,--blocksize", bs_blocksize, "Bytes per group (0 picks one)");
    bench_scaling->add_option("--runs", bs_runs, "Repetitions per count (median reported)");
    bench_scaling->add_option("-o,--out", bs_out, "Report path (default: stdout)");

    // bench-stability / bench-pressure
    std::string bt_server, bt_dataset, bt_algorithm = "harris", bt_out;
    std::size_t bt_batches = 10, bt_batch_size = 10, bt_images = 200, bt_concurrency = 16;
    std::uint64_t bt_seed = 1;
    auto* bench_stability = app.add_subcommand("bench-stability", "Per-batch latency of repeated uploads");
    auto* bench_pressure = app.add_subcommand("bench-pressure", "Unpaced upload of a dataset");
    for (auto* sub : {bench_stability, bench_pressure}) {
        sub->add_option("-s,--server", bt_server, "host:port; omitted starts an in-process service");
        sub->add_option("-d,--dataset", bt_dataset, "Directory of PNM files (default: synthetic)");
        sub->add_option("-a,--algorithm", bt_algorithm, "Algorithm of the in-process service");
        sub->add_option("--concurrency", bt_concurrency, "Client connections")->check(CLI::PositiveNumber);
        sub->add_option("--seed", bt_seed, "Synthetic dataset seed");
        sub->add_option("-o,--out", bt_out, "Report path (default: stdout)");
    }
    bench_stability->add_option("--batches", bt_batches, "Number of batches");
    bench_stability->add_option("--batch-size", bt_batch_size, "Identical requests per batch");
    bench_pressure->add_option("--images", bt_images, "Images to upload");

    // synth
    std::string sy_out;
    std::size_t sy_count = 100;
    std::uint32_t sy_width = 64, sy_height = 64;
    std::uint64_t sy_seed = 1;
    auto* synth_cmd = app.add_subcommand("synth", "Write synthetic value-noise PGMs");
    synth_cmd->add_option("dir", sy_out, "Output directory")->required();
    synth_cmd->add_option("-n,--count", sy_count, "Number of images");
    synth_cmd->add_option("--width", sy_width, "Width")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--height", sy_height, "Height")->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", sy_seed, "First seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pack) {
            if (!fs::is_directory(pack_dir)) {
                throw Error(ErrorCode::Io, pack_dir + ": " + std::make_error_code(std::errc::not_a_directory).message());
            }
            fs::create_directories(pack_out);
            const PackResult r = pack_directory(pack_dir, pack_out, pack_name, pack_threshold);
            for (const auto& e : r.errors) std::cerr << "skipped " << e.file << ": " << e.message << "\n";
            if (r.total_entries() == 0) {
                std::cerr << "no inputs in " << pack_dir << "\n";
                return 1;
            }
            for (const auto& s : r.stores) {
                std::cout << s.paths.data.string() << ": " << s.entries << " entries, " << s.data_bytes << " bytes\n";
            }
            std::cout << r.total_entries() << " entries, " << r.total_bytes() << " bytes in " << r.stores.size()
                      << " store(s)\n";
            return r.errors.empty() ? 0 : 2;
        }

        if (*inspect) {
            if (inspect_store.empty()) {
                std::cerr << "inspect: empty store path\n";
                return 64;
            }
            const auto paths = resolve_store(inspect_store);
            const BigImage store = BigImage::load(paths.data, paths.index);
            if (!inspect_quiet) {
                std::cout << "filename,id,offset,length\n";
                for (const auto& e : store.entries()) {
                    char id[17];
                    std::snprintf(id, sizeof id, "%016llx", static_cast<unsigned long long>(e.id));
                    std::cout << csv_escape(e.filename) << "," << id << "," << e.start_offset << "," << e.record_length
                              << "\n";
                }
            }
            store.verify();
            std::cout << "OK " << store.size() << " entries, " << store.data_size() << " bytes\n";
            return 0;
        }

        if (*run) {
            const Algorithm algorithm = parse_algorithm(run_algorithm);
            const AlphaSelection alpha = AlphaSelection::parse(run_alpha);
            const auto paths = resolve_store(run_store);
            const BigImage store = BigImage::load(paths.data, paths.index);
            const JobResult job = run_job(store, run_blocksize, algorithm, alpha, run_workers);
            write_output(job.output, run_out, run_desc.empty() ? run_out + ".desc" : run_desc);
            std::printf("images=%zu groups=%zu num_map_task=%llu workers=%zu records=%zu keypoints=%zu wall_s=%.6f\n",
                        job.stats.images, job.stats.groups, static_cast<unsigned long long>(job.stats.num_map_task),
                        job.stats.workers, job.output.records.size(), job.stats.keypoints, job.stats.wall_seconds);
            return 0;
        }

        if (*serve) {
            dicp::ServiceOptions options;
            options.max_inflight = serve_inflight;
            dicp::DicpService service(dicp::load_match_config(serve_config), options);
            dicp::DicpServer server(service, dicp::Endpoint::parse(serve_listen));
            server.start();
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << server.endpoint().to_string() << "\n";
            const auto start = std::chrono::steady_clock::now();
            while (!g_stop) {
                std::this_thread::sleep_for(std::chrono::milliseconds(100));
                if (serve_duration > 0 &&
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() >= serve_duration) {
                    break;
                }
            }
            server.stop();
            if (!serve_staging.empty()) {
                const auto paths = resolve_store(serve_staging);
                service.save_staging(paths);
                std::cerr << "staged " << service.staging_size() << " images in " << paths.data.string() << "\n";
            }
            std::cerr << "served " << server.connections_served() << " connections\n";
            return 0;
        }

        if (*bench_input) {
            const auto sizes = parse_sizes(bi_sizes);
            const std::size_t need = *std::max_element(sizes.begin(), sizes.end());
            if (bi_generate) {
                std::size_t have = 0;
                if (fs::is_directory(bi_dir)) {
                    for (const auto& e : fs::directory_iterator(bi_dir)) have += e.is_regular_file();
                }
                if (have < need) synth::write_pgm_directory(bi_dir, need, 64, 64, 1);
            }
            const fs::path work = bi_work.empty() ? fs::path(bi_dir).concat(".stores") : fs::path(bi_work);
            const auto result = bench::bench_input(bi_dir, sizes, work, bi_runs);
            emit(result.report, bi_out);
            return 0;
        }

        if (*bench_scaling) {
            const Algorithm algorithm = parse_algorithm(bs_algorithm);
            BigImage store;
            if (!bs_store.empty()) {
                const auto paths = resolve_store(bs_store);
                store = BigImage::load(paths.data, paths.index);
            } else {
                const std::size_t n = bs_synthetic ? bs_synthetic : 2000;
                for (auto& img : synth::texture_dataset(n, 256, 256, 1)) store.append(img);
            }
            const auto result = bench::bench_scaling(store, algorithm, parse_sizes(bs_workers), bs_blocksize, bs_runs);
            emit(result.report, bs_out);
            return 0;
        }

        if (*bench_stability || *bench_pressure) {
            Target target(bt_server, bt_algorithm);
            if (*bench_stability) {
                const auto pool = upload_dataset(bt_dataset, bt_batches, bt_seed);
                std::vector<std::vector<dicp::UploadImage>> batches;
                for (std::size_t b = 0; b < bt_batches; ++b) {
                    batches.emplace_back(bt_batch_size, pool[b]);
                }
                const auto result = dicp::run_stability_trial(target.endpoint, batches, bt_concurrency);
                auto report = bench::stability_report(result);
                report.note("server", target.server ? "in-process" : bt_server);
                emit(report, bt_out);
            } else {
                const auto images = upload_dataset(bt_dataset, bt_images, bt_seed);
                const auto result = dicp::run_pressure_trial(target.endpoint, images, bt_concurrency);
                auto report = bench::pressure_report(result);
                report.note("server", target.server ? "in-process" : bt_server);
                emit(report, bt_out);
                if (!result.ok()) return 1;
            }
            return 0;
        }

        if (*synth_cmd) {
            const auto paths = synth::write_pgm_directory(sy_out, sy_count, sy_width, sy_height, sy_seed);
            std::cout << paths.size() << " images written to " << sy_out << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::InvalidArgument ? 64 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
