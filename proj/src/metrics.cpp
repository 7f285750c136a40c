#include "hsplat/metrics.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "hsplat/error.hpp"

namespace hsplat {

namespace {

void check_same_size(int aw, int ah, int bw, int bh) {
    if (aw != bw || ah != bh) {
        throw Error(ErrorCode::invalid_input, "image sizes differ: " + std::to_string(aw) + "x" + std::to_string(ah) +
                                                  " vs " + std::to_string(bw) + "x" + std::to_string(bh));
    }
}

std::vector<double> luminance(const Rgba8Image& img) {
    std::vector<double> out(static_cast<std::size_t>(img.width) * img.height);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = (static_cast<double>(img.pixels[4 * i]) + img.pixels[4 * i + 1] + img.pixels[4 * i + 2]) / 3.0;
    }
    return out;
}

constexpr int kWindow = 11;

std::array<double, kWindow> gaussian_window() {
    std::array<double, kWindow> w{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kWindow / 2;
        w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += w[static_cast<std::size_t>(i)];
    }
    for (double& v : w) {
        v /= sum;
    }
    return w;
}

// Valid-region separable filter: output is (w-10) x (h-10).
std::vector<double> filter_valid(const std::vector<double>& src, int w, int h) {
    static const auto win = gaussian_window();
    const int ow = w - kWindow + 1;
    const int oh = h - kWindow + 1;
    std::vector<double> tmp(static_cast<std::size_t>(ow) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) {
                acc += win[static_cast<std::size_t>(k)] * src[static_cast<std::size_t>(y) * w + x + k];
            }
            tmp[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(ow) * oh);
    for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWindow; ++k) {
                acc += win[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>(y + k) * ow + x];
            }
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    }
    return out;
}

std::string num(double v) {
    std::array<char, 64> buf{};
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), r.ptr);
}

template <typename T>
T parse_field(std::string_view s, std::size_t line) {
    T v{};
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size()) {
        throw Error(ErrorCode::parse, "bench csv line " + std::to_string(line) + ": bad field '" + std::string(s) + "'");
    }
    return v;
}

double median_of(std::vector<double> v) {
    if (v.empty()) {
        return 0.0;
    }
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::vector<std::size_t> strided_indices(std::size_t n, double fraction) {
    const auto keep = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fraction));
    std::vector<std::size_t> idx;
    idx.reserve(keep);
    for (std::size_t j = 0; j < keep; ++j) {
        idx.push_back(static_cast<std::size_t>(static_cast<double>(j) * static_cast<double>(n) / static_cast<double>(keep)));
    }
    return idx;
}

GaussianBatch subsample_batch(const GaussianBatch& b, double fraction) {
    GaussianBatch out;
    out.meta = b.meta;
    const std::size_t cpg = b.coeffs_per_gaussian();
    const auto idx = strided_indices(b.meta.count, fraction);
    for (std::size_t i : idx) {
        out.positions.push_back(b.positions[i]);
        if (b.meta.covariance == CovarianceForm::upper) {
            out.cov_upper.push_back(b.cov_upper[i]);
        } else {
            out.scales.push_back(b.scales[i]);
            out.rotations.push_back(b.rotations[i]);
        }
        out.opacity.push_back(b.opacity[i]);
        out.color.insert(out.color.end(), b.color.begin() + static_cast<std::ptrdiff_t>(i * cpg),
                         b.color.begin() + static_cast<std::ptrdiff_t>((i + 1) * cpg));
    }
    out.meta.count = idx.size();
    return out;
}

PackedSplatBuffer subsample_packed(const PackedSplatBuffer& p, double fraction) {
    PackedSplatBuffer out;
    out.degree = p.degree;
    out.color_mode = p.color_mode;
    const std::size_t cw = p.color_words();
    const auto idx = strided_indices(p.count, fraction);
    auto copy_words = [](const std::vector<std::uint32_t>& src, std::vector<std::uint32_t>& dst, std::size_t i,
                         std::size_t stride) {
        dst.insert(dst.end(), src.begin() + static_cast<std::ptrdiff_t>(i * stride),
                   src.begin() + static_cast<std::ptrdiff_t>((i + 1) * stride));
    };
    for (std::size_t i : idx) {
        copy_words(p.pos_opacity, out.pos_opacity, i, PackedSplatBuffer::kPosWords);
        copy_words(p.cov6, out.cov6, i, PackedSplatBuffer::kCovWords);
        copy_words(p.color, out.color, i, cw);
    }
    out.count = static_cast<std::uint32_t>(idx.size());
    return out;
}

class SubsampledGenerator final : public GaussianGenerator {
public:
    SubsampledGenerator(std::shared_ptr<const GaussianGenerator> inner, double fraction)
        : inner_(std::move(inner)), fraction_(fraction) {}

    std::string_view kind() const override { return inner_->kind(); }
    bool requires_pose() const override { return inner_->requires_pose(); }
    std::size_t max_count() const override { return strided_indices(inner_->max_count(), fraction_).size(); }
    int degree() const override { return inner_->degree(); }

protected:
    GaussianBatch run(const GeneratorInputs& inputs) const override {
        return subsample_batch(generate(*inner_, inputs), fraction_);
    }

private:
    std::shared_ptr<const GaussianGenerator> inner_;
    double fraction_;
};

std::string scale_label(double s) {
    if (s > 0.0 && s <= 1.0) {
        const double inv = 1.0 / s;
        if (std::abs(inv - std::round(inv)) < 1e-9) {
            return "1/" + std::to_string(static_cast<long long>(std::llround(inv)));
        }
    }
    return num(s);
}

}  // namespace

double psnr(const Rgba8Image& a, const Rgba8Image& b) {
    check_same_size(a.width, a.height, b.width, b.height);
    const std::size_t n = static_cast<std::size_t>(a.width) * a.height;
    if (n == 0) {
        throw Error(ErrorCode::invalid_input, "psnr of empty images");
    }
    double se = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            const double d = static_cast<double>(a.pixels[4 * i + c]) - b.pixels[4 * i + c];
            se += d * d;
        }
    }
    const double mse = se / static_cast<double>(3 * n);
    if (mse == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 20.0 * std::log10(255.0 / std::sqrt(mse));
}

double psnr(const Image& a, const Image& b) {
    check_same_size(a.width, a.height, b.width, b.height);
    return psnr(to_rgba8(a), to_rgba8(b));
}

double ssim(const Rgba8Image& a, const Rgba8Image& b) {
    check_same_size(a.width, a.height, b.width, b.height);
    if (a.width < kWindow || a.height < kWindow) {
        throw Error(ErrorCode::invalid_input, "ssim needs images of at least 11x11");
    }
    const int w = a.width, h = a.height;
    const auto la = luminance(a);
    const auto lb = luminance(b);
    std::vector<double> aa(la.size()), bb(la.size()), ab(la.size());
    for (std::size_t i = 0; i < la.size(); ++i) {
        aa[i] = la[i] * la[i];
        bb[i] = lb[i] * lb[i];
        ab[i] = la[i] * lb[i];
    }
    const auto mu_a = filter_valid(la, w, h);
    const auto mu_b = filter_valid(lb, w, h);
    const auto e_aa = filter_valid(aa, w, h);
    const auto e_bb = filter_valid(bb, w, h);
    const auto e_ab = filter_valid(ab, w, h);
    const double c1 = (0.01 * 255.0) * (0.01 * 255.0);
    const double c2 = (0.03 * 255.0) * (0.03 * 255.0);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double va = e_aa[i] - ma * ma;
        const double vb = e_bb[i] - mb * mb;
        const double cov = e_ab[i] - ma * mb;
        sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return sum / static_cast<double>(mu_a.size());
}

double ssim(const Image& a, const Image& b) {
    check_same_size(a.width, a.height, b.width, b.height);
    return ssim(to_rgba8(a), to_rgba8(b));
}

bool operator==(const BenchRow& a, const BenchRow& b) {
    const auto& x = a.stats;
    const auto& y = b.stats;
    return a.frame == b.frame && a.inversions == b.inversions && x.generate_ms == y.generate_ms &&
           x.preprocess_ms == y.preprocess_ms && x.sort_ms == y.sort_ms && x.draw_ms == y.draw_ms &&
           x.total_ms == y.total_ms && x.splats_in == y.splats_in && x.splats_visible == y.splats_visible;
}

StageSummary BenchmarkReport::mean() const {
    StageSummary s;
    if (rows.empty()) {
        return s;
    }
    for (const auto& r : rows) {
        s.generate_ms += r.stats.generate_ms;
        s.preprocess_ms += r.stats.preprocess_ms;
        s.sort_ms += r.stats.sort_ms;
        s.draw_ms += r.stats.draw_ms;
        s.total_ms += r.stats.total_ms;
    }
    const double n = static_cast<double>(rows.size());
    s.generate_ms /= n;
    s.preprocess_ms /= n;
    s.sort_ms /= n;
    s.draw_ms /= n;
    s.total_ms /= n;
    return s;
}

StageSummary BenchmarkReport::median() const {
    auto column = [&](auto field) {
        std::vector<double> v;
        for (const auto& r : rows) {
            v.push_back(r.stats.*field);
        }
        return median_of(std::move(v));
    };
    StageSummary s;
    s.generate_ms = column(&FrameStats::generate_ms);
    s.preprocess_ms = column(&FrameStats::preprocess_ms);
    s.sort_ms = column(&FrameStats::sort_ms);
    s.draw_ms = column(&FrameStats::draw_ms);
    s.total_ms = column(&FrameStats::total_ms);
    return s;
}

BenchmarkReport run_benchmark(const Scene& scene, const std::vector<TrajectoryFrame>& trajectory,
                              const SortStrategy& strategy, int warmup_frames) {
    if (trajectory.empty()) {
        throw Error(ErrorCode::invalid_input, "benchmark trajectory is empty");
    }
    BenchmarkReport report;
    report.strategy = strategy.token();
    report.gaussians = scene.max_gaussians();
    report.width = trajectory.front().camera.viewport.width;
    report.height = trajectory.front().camera.viewport.height;
    for (int i = 0; i < warmup_frames; ++i) {
        Renderer warm(strategy);
        warm.render(scene, trajectory.front().camera, trajectory.front().inputs);
    }
    Renderer renderer(strategy);
    for (std::size_t f = 0; f < trajectory.size(); ++f) {
        GeneratorInputs inputs = trajectory[f].inputs;
        inputs.frame_index = f;
        const FrameResult frame = renderer.render(scene, trajectory[f].camera, inputs);
        report.rows.push_back({f, frame.stats, frame.inversions});
    }
    return report;
}

std::string report_csv(const BenchmarkReport& report) {
    std::string out(kBenchCsvHeader);
    out += '\n';
    for (const auto& r : report.rows) {
        const auto& s = r.stats;
        out += std::to_string(r.frame) + ',' + num(s.generate_ms) + ',' + num(s.preprocess_ms) + ',' + num(s.sort_ms) +
               ',' + num(s.draw_ms) + ',' + num(s.total_ms) + ',' + std::to_string(s.splats_in) + ',' +
               std::to_string(s.splats_visible) + ',' + std::to_string(r.inversions) + '\n';
    }
    return out;
}

std::vector<BenchRow> parse_report_csv(std::string_view csv) {
    std::vector<BenchRow> rows;
    std::size_t line_no = 0;
    std::size_t at = 0;
    while (at < csv.size()) {
        auto end = csv.find('\n', at);
        if (end == std::string_view::npos) {
            end = csv.size();
        }
        std::string_view line = csv.substr(at, end - at);
        at = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line_no == 1) {
            if (line != kBenchCsvHeader) {
                throw Error(ErrorCode::schema, "unexpected bench csv header");
            }
            continue;
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string_view> f;
        std::size_t s = 0;
        while (true) {
            const auto c = line.find(',', s);
            f.push_back(line.substr(s, c == std::string_view::npos ? std::string_view::npos : c - s));
            if (c == std::string_view::npos) {
                break;
            }
            s = c + 1;
        }
        if (f.size() != 9) {
            throw Error(ErrorCode::parse, "bench csv line " + std::to_string(line_no) + " has " +
                                              std::to_string(f.size()) + " fields");
        }
        BenchRow r;
        r.frame = parse_field<std::uint64_t>(f[0], line_no);
        r.stats.generate_ms = parse_field<double>(f[1], line_no);
        r.stats.preprocess_ms = parse_field<double>(f[2], line_no);
        r.stats.sort_ms = parse_field<double>(f[3], line_no);
        r.stats.draw_ms = parse_field<double>(f[4], line_no);
        r.stats.total_ms = parse_field<double>(f[5], line_no);
        r.stats.splats_in = parse_field<std::uint64_t>(f[6], line_no);
        r.stats.splats_visible = parse_field<std::uint64_t>(f[7], line_no);
        r.inversions = parse_field<std::uint64_t>(f[8], line_no);
        rows.push_back(r);
    }
    if (line_no == 0) {
        throw Error(ErrorCode::schema, "bench csv is empty");
    }
    return rows;
}

namespace {

nlohmann::json summary_json(const StageSummary& s) {
    return {{"generate_ms", s.generate_ms}, {"preprocess_ms", s.preprocess_ms}, {"sort_ms", s.sort_ms},
            {"draw_ms", s.draw_ms},         {"total_ms", s.total_ms},           {"prep_draw_ms", s.prep_draw_ms()}};
}

}  // namespace

std::string report_json(const BenchmarkReport& report) {
    const StageSummary med = report.median();
    nlohmann::json j = {
        {"scene", {{"gaussians", report.gaussians}, {"strategy", report.strategy},
                   {"width", report.width}, {"height", report.height}}},
        {"frames", report.rows.size()},
        {"mean", summary_json(report.mean())},
        {"median", summary_json(med)},
        {"table1", {{"sort_ms", med.sort_ms}, {"prep_draw_ms", med.prep_draw_ms()}, {"total_ms", med.total_ms}}},
    };
    return j.dump(2);
}

Scene subsample_scene(const Scene& scene, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw Error(ErrorCode::invalid_input, "scale must lie in (0, 1]");
    }
    Scene out = scene;
    if (fraction == 1.0) {
        return out;
    }
    for (auto& m : out.models) {
        if (m.generator) {
            m.generator = std::make_shared<SubsampledGenerator>(m.generator, fraction);
        } else if (m.batch) {
            m.batch = std::make_shared<const GaussianBatch>(subsample_batch(*m.batch, fraction));
        } else if (m.packed) {
            m.packed = std::make_shared<const PackedSplatBuffer>(subsample_packed(*m.packed, fraction));
        }
    }
    return out;
}

std::vector<ScaleRow> run_scale_sweep(const Scene& scene, const std::vector<TrajectoryFrame>& trajectory,
                                      const SortStrategy& strategy, const std::vector<double>& scales) {
    std::vector<ScaleRow> rows;
    for (double s : scales) {
        const Scene sub = subsample_scene(scene, s);
        rows.push_back({s, run_benchmark(sub, trajectory, strategy)});
    }
    return rows;
}

std::string scale_table_csv(const std::vector<ScaleRow>& rows) {
    std::string out = "scale,gaussians,sort_ms,prep_draw_ms,total_ms\n";
    for (const auto& r : rows) {
        const auto med = r.report.median();
        out += num(r.scale) + ',' + std::to_string(r.report.gaussians) + ',' + num(med.sort_ms) + ',' +
               num(med.prep_draw_ms()) + ',' + num(med.total_ms) + '\n';
    }
    return out;
}

std::string scale_table_json(const std::vector<ScaleRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        const auto med = r.report.median();
        arr.push_back({{"scale", scale_label(r.scale)},
                       {"scale_value", r.scale},
                       {"gaussians", r.report.gaussians},
                       {"frames", r.report.rows.size()},
                       {"sort_ms", med.sort_ms},
                       {"prep_draw_ms", med.prep_draw_ms()},
                       {"total_ms", med.total_ms}});
    }
    nlohmann::json j = {{"columns", {"scale", "gaussians", "sort_ms", "prep_draw_ms", "total_ms"}}, {"rows", arr}};
    if (!rows.empty()) {
        j["strategy"] = rows.front().report.strategy;
        j["width"] = rows.front().report.width;
        j["height"] = rows.front().report.height;
    }
    return j.dump(2);
}

}  // namespace hsplat
