#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <boost/asio/io_context.hpp>
#include <boost/asio/signal_set.hpp>

#include "hsplat/asset_io.hpp"
#include "hsplat/metrics.hpp"
#include "hsplat/scene_io.hpp"
#include "hsplat/server.hpp"

namespace fs = std::filesystem;
using namespace hsplat;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw Error(ErrorCode::io, "cannot write " + path.string());
    }
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
    return out.parent_path() / (out.stem().string() + suffix);
}

int cmd_render(const std::string& scene_path, const std::string& camera_path, const std::string& out,
               const std::string& strategy, std::string format, bool print_stats) {
    const Scene scene = load_scene(scene_path);
    const TrajectoryFrame view = load_view(camera_path, scene);
    const FrameResult frame = render_frame(scene, view.camera, view.inputs, SortStrategy::parse(strategy));
    if (format.empty()) {
        const auto ext = fs::path(out).extension().string();
        format = ext == ".rgba" || ext == ".raw" ? "raw" : "png";
    }
    if (format == "png") {
        write_png(out, frame.image);
    } else if (format == "raw") {
        write_raw_rgba(out, frame.image);
    } else {
        throw Error(ErrorCode::invalid_input, "unknown format '" + format + "'");
    }
    if (print_stats) {
        std::cout << frame_stats_json(frame.stats, frame.inversions) << "\n";
    }
    return 0;
}

int cmd_bench(const std::string& scene_path, const std::string& trajectory_path, const std::string& out,
              const std::string& strategy_token, const std::vector<double>& scales, int warmup) {
    const Scene scene = load_scene(scene_path);
    const auto trajectory = load_trajectory(trajectory_path, scene);
    const SortStrategy strategy = SortStrategy::parse(strategy_token);
    const fs::path out_path(out);

    std::vector<ScaleRow> rows;
    for (double s : scales) {
        const Scene sub = subsample_scene(scene, s);
        rows.push_back({s, run_benchmark(sub, trajectory, strategy, warmup)});
        const auto med = rows.back().report.median();
        std::cerr << "scale " << s << ": " << rows.back().report.gaussians << " gaussians, median total "
                  << med.total_ms << " ms (sort " << med.sort_ms << ", prep+draw " << med.prep_draw_ms() << ")\n";
    }
    write_text(out_path, report_csv(rows.front().report));
    write_text(sibling(out_path, ".json"), report_json(rows.front().report));
    if (scales.size() > 1) {
        write_text(sibling(out_path, ".table.csv"), scale_table_csv(rows));
        write_text(sibling(out_path, ".table.json"), scale_table_json(rows));
    }
    return 0;
}

int cmd_serve(const std::string& scene_path, int port, const std::string& host, const SessionOptions& options) {
    auto scene = std::make_shared<const Scene>(load_scene(scene_path));
    ViewerServer server(scene, options, static_cast<std::uint16_t>(port), host);
    boost::asio::io_context signals_ctx;
    boost::asio::signal_set signals(signals_ctx, SIGINT, SIGTERM);
    signals.async_wait([&](const boost::system::error_code& ec, int) {
        if (!ec) {
            server.stop();
        }
    });
    std::thread signal_thread([&] { signals_ctx.run(); });
    std::cout << "listening on ws://" << host << ":" << server.port() << "/" << std::endl;
    server.run();
    signals_ctx.stop();
    signal_thread.join();
    return 0;
}

int cmd_inspect(const std::string& ply) {
    const auto sources = load_splat_ply(ply);
    std::cout << "count: " << sources.size() << "\n";
    std::cout << "degree: " << (sources.empty() ? 0 : sources.front().degree) << "\n";
    if (sources.empty()) {
        std::cout << "bounds: empty\n";
        return 0;
    }
    Vec3f lo = sources.front().position, hi = lo;
    for (const auto& g : sources) {
        lo = lo.cwiseMin(g.position);
        hi = hi.cwiseMax(g.position);
    }
    std::cout << "bounds: min " << lo.x() << " " << lo.y() << " " << lo.z() << " max " << hi.x() << " " << hi.y()
              << " " << hi.z() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hybrid Gaussian splatting renderer"};
    app.require_subcommand(1);

    std::string scene, camera, out, strategy = "global", format, trajectory, ply, host = "127.0.0.1",
                                     encoding = "raw";
    bool stats = false;
    std::vector<double> scales = {1.0};
    int warmup = 1, port = 8765, width = 640, height = 480;
    double fps = 0.0;

    auto* render = app.add_subcommand("render", "Render one frame to PNG or raw RGBA8");
    render->add_option("--scene", scene, "Scene descriptor JSON")->required()->check(CLI::ExistingFile);
    render->add_option("--camera", camera, "Camera JSON")->required()->check(CLI::ExistingFile);
    render->add_option("--out", out, "Output image (.png, .rgba)")->required();
    render->add_option("--strategy", strategy, "global | lazy:N | local:N");
    render->add_option("--format", format, "png | raw (default from extension)");
    render->add_flag("--stats", stats, "Print frame stats JSON");

    auto* bench = app.add_subcommand("bench", "Render a trajectory and write per-frame timings");
    bench->add_option("--scene", scene, "Scene descriptor JSON")->required()->check(CLI::ExistingFile);
    bench->add_option("--trajectory", trajectory, "Trajectory JSON")->required()->check(CLI::ExistingFile);
    bench->add_option("--out", out, "Per-frame CSV")->required();
    bench->add_option("--strategy", strategy, "global | lazy:N | local:N");
    bench->add_option("--scales", scales, "Subsampling fractions, e.g. 1 0.5 0.25 0.125")->delimiter(',');
    bench->add_option("--warmup", warmup, "Untimed frames before the run")->check(CLI::NonNegativeNumber);

    auto* serve = app.add_subcommand("serve", "WebSocket viewer service");
    serve->add_option("--scene", scene, "Scene descriptor JSON")->required()->check(CLI::ExistingFile);
    serve->add_option("--port", port, "TCP port (0 picks one)")->check(CLI::Range(0, 65535));
    serve->add_option("--host", host, "Listen address");
    serve->add_option("--width", width)->check(CLI::Range(1, 8192));
    serve->add_option("--height", height)->check(CLI::Range(1, 8192));
    serve->add_option("--fps", fps, "Continuous mode rate, 0 = on demand")->check(CLI::NonNegativeNumber);
    serve->add_option("--encoding", encoding, "raw | png");
    serve->add_option("--strategy", strategy, "Initial sort strategy");

    auto* inspect = app.add_subcommand("inspect", "Summarize a splat PLY");
    inspect->add_option("--ply", ply, "PLY file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*render) {
            return cmd_render(scene, camera, out, strategy, format, stats);
        }
        if (*bench) {
            if (scales.empty()) {
                throw Error(ErrorCode::invalid_input, "--scales needs at least one value");
            }
            return cmd_bench(scene, trajectory, out, strategy, scales, warmup);
        }
        if (*serve) {
            SessionOptions options;
            options.viewport = {width, height};
            options.continuous_fps = fps;
            options.encoding = parse_encoding(encoding);
            options.strategy = SortStrategy::parse(strategy);
            return cmd_serve(scene, port, host, options);
        }
        return cmd_inspect(ply);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
