#include "hsplat/fixtures.hpp"

#include <cmath>
#include <cstring>
#include <random>

#include "hsplat/asset_io.hpp"
#include "hsplat/error.hpp"
#include "hsplat/synthetic.hpp"

namespace hsplat {

namespace {

constexpr char kMagic[4] = {'V', 'S', 'W', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kMaxJoints = 24;
constexpr int kMaxGrid = 64;
constexpr std::size_t kMaxAnchors = 4096;

void put_u32(std::vector<std::byte>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::byte>((v >> (8 * i)) & 0xFFu));
    }
}

class Reader {
public:
    explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(bytes_[at_ + i]) << (8 * i);
        }
        at_ += 4;
        return v;
    }
    void raw(void* dst, std::size_t n) {
        need(n);
        std::memcpy(dst, bytes_.data() + at_, n);
        at_ += n;
    }
    std::size_t remaining() const { return bytes_.size() - at_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) {
            throw Error(ErrorCode::bounds, "weight container truncated");
        }
    }
    std::span<const std::byte> bytes_;
    std::size_t at_ = 0;
};

// --- seeded construction helpers ---------------------------------------------

class Seeded {
public:
    explicit Seeded(std::uint64_t seed) : rng_(seed) {}

    Tensor normal(std::vector<std::uint32_t> dims, float stddev, float mean = 0.0f) {
        Tensor t{std::move(dims), {}};
        std::normal_distribution<float> d(mean, stddev);
        t.data.resize(t.element_count());
        for (float& v : t.data) {
            v = d(rng_);
        }
        return t;
    }
    Tensor uniform(std::vector<std::uint32_t> dims, float lo, float hi) {
        Tensor t{std::move(dims), {}};
        std::uniform_real_distribution<float> d(lo, hi);
        t.data.resize(t.element_count());
        for (float& v : t.data) {
            v = d(rng_);
        }
        return t;
    }
    std::mt19937_64& rng() { return rng_; }

private:
    std::mt19937_64 rng_;
};

// Two-layer head: in -> hidden (relu) -> out. The output layer is scaled by
// `gain`, or zeroed entirely when gain == 0.
void add_head(TensorStore& store, Seeded& s, const std::string& name, std::uint32_t in, std::uint32_t hidden,
              std::uint32_t out, float gain, std::vector<float> out_bias = {}) {
    store[name + ".0.weight"] = s.normal({hidden, in}, 1.0f / std::sqrt(static_cast<float>(in)));
    store[name + ".0.bias"] = s.normal({hidden}, 0.1f);
    Tensor w = s.normal({out, hidden}, gain / std::sqrt(static_cast<float>(hidden)));
    Tensor b = Tensor{{out}, std::vector<float>(out, 0.0f)};
    if (!out_bias.empty()) {
        for (std::uint32_t i = 0; i < out; ++i) {
            b.data[i] = out_bias[i % out_bias.size()];
        }
    }
    if (gain == 0.0f) {
        std::fill(w.data.begin(), w.data.end(), 0.0f);
    }
    store[name + ".1.weight"] = std::move(w);
    store[name + ".1.bias"] = std::move(b);
}

void add_canonical(TensorStore& store, const std::vector<GaussianSource>& gs, int degree) {
    const auto n = static_cast<std::uint32_t>(gs.size());
    const auto c = static_cast<std::uint32_t>(sh_coeff_count(degree));
    Tensor pos{{n, 3}, {}}, scale{{n, 3}, {}}, rot{{n, 4}, {}}, op{{n}, {}}, sh{{n, c, 3}, {}};
    for (const auto& g : gs) {
        pos.data.insert(pos.data.end(), {g.position.x(), g.position.y(), g.position.z()});
        scale.data.insert(scale.data.end(), {g.scale.x(), g.scale.y(), g.scale.z()});
        rot.data.insert(rot.data.end(), {g.rotation.w, g.rotation.x, g.rotation.y, g.rotation.z});
        op.data.push_back(g.opacity);
        for (const Vec3f& k : g.sh) {
            sh.data.insert(sh.data.end(), {k.x(), k.y(), k.z()});
        }
    }
    store["canonical_positions"] = std::move(pos);
    store["canonical_scales"] = std::move(scale);
    store["canonical_rotations"] = std::move(rot);
    store["canonical_opacity"] = std::move(op);
    store["canonical_sh"] = std::move(sh);
}

// --- store -> parameters ------------------------------------------------------

const Tensor& get(const TensorStore& store, const std::string& name, std::size_t ndim) {
    auto it = store.find(name);
    if (it == store.end()) {
        throw Error(ErrorCode::schema, "missing tensor " + name);
    }
    if (it->second.dims.size() != ndim || it->second.data.size() != it->second.element_count()) {
        throw Error(ErrorCode::schema, "tensor " + name + " has the wrong rank or size");
    }
    return it->second;
}

MlpParams read_mlp(const TensorStore& store, const std::string& name) {
    MlpParams mlp;
    for (int l = 0;; ++l) {
        const std::string prefix = name + "." + std::to_string(l);
        if (store.find(prefix + ".weight") == store.end()) {
            break;
        }
        const Tensor& w = get(store, prefix + ".weight", 2);
        const Tensor& b = get(store, prefix + ".bias", 1);
        DenseLayer layer;
        layer.weight = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            w.data.data(), w.dims[0], w.dims[1]);
        layer.bias = Eigen::Map<const Eigen::VectorXf>(b.data.data(), b.dims[0]);
        mlp.layers.push_back(std::move(layer));
    }
    if (mlp.layers.empty()) {
        throw Error(ErrorCode::schema, "missing mlp " + name);
    }
    for (std::size_t l = 0; l + 1 < mlp.layers.size(); ++l) {
        mlp.layers[l].activation = Activation::relu;
    }
    mlp.validate();
    return mlp;
}

std::vector<GaussianSource> read_canonical(const TensorStore& store) {
    const Tensor& pos = get(store, "canonical_positions", 2);
    const Tensor& scale = get(store, "canonical_scales", 2);
    const Tensor& rot = get(store, "canonical_rotations", 2);
    const Tensor& op = get(store, "canonical_opacity", 1);
    const Tensor& sh = get(store, "canonical_sh", 3);
    const std::uint32_t n = pos.dims[0];
    const std::uint32_t coeffs = sh.dims[1];
    int degree = -1;
    for (int d = 0; d <= kMaxShDegree; ++d) {
        if (static_cast<std::uint32_t>(sh_coeff_count(d)) == coeffs) {
            degree = d;
        }
    }
    if (pos.dims[1] != 3 || scale.dims != std::vector<std::uint32_t>{n, 3} ||
        rot.dims != std::vector<std::uint32_t>{n, 4} || op.dims[0] != n || sh.dims[0] != n || sh.dims[2] != 3 ||
        degree < 0) {
        throw Error(ErrorCode::schema, "canonical tensors disagree on shape");
    }
    std::vector<GaussianSource> out(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        GaussianSource& g = out[i];
        g.position = Vec3f(pos.data[3 * i], pos.data[3 * i + 1], pos.data[3 * i + 2]);
        g.scale = Vec3f(scale.data[3 * i], scale.data[3 * i + 1], scale.data[3 * i + 2]);
        Quat q{rot.data[4 * i], rot.data[4 * i + 1], rot.data[4 * i + 2], rot.data[4 * i + 3]};
        const float qn = q.norm();
        if (!(qn > 1e-12f)) {
            throw Error(ErrorCode::invalid_input, "canonical rotation has zero norm");
        }
        g.rotation = std::abs(qn - 1.0f) > 1e-7f ? Quat{q.w / qn, q.x / qn, q.y / qn, q.z / qn} : q;
        g.opacity = op.data[i];
        if (!(g.opacity > 0.0f && g.opacity < 1.0f) || !(g.scale.minCoeff() > 0.0f)) {
            throw Error(ErrorCode::invalid_input, "canonical opacity/scale out of range");
        }
        g.degree = degree;
        for (std::uint32_t k = 0; k < coeffs; ++k) {
            const std::size_t at = (static_cast<std::size_t>(i) * coeffs + k) * 3;
            g.sh.emplace_back(sh.data[at], sh.data[at + 1], sh.data[at + 2]);
        }
    }
    return out;
}

template <typename T>
T value_or(const nlohmann::json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (std::uint32_t d : dims) {
        n *= d;
    }
    return n;
}

std::vector<std::byte> serialize_tensors(const TensorStore& store) {
    std::vector<std::byte> out;
    for (char c : kMagic) {
        out.push_back(static_cast<std::byte>(c));
    }
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(store.size()));
    for (const auto& [name, t] : store) {
        if (t.data.size() != t.element_count()) {
            throw Error(ErrorCode::invalid_input, "tensor " + name + " data does not match dims");
        }
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        for (char c : name) {
            out.push_back(static_cast<std::byte>(c));
        }
        put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
        for (std::uint32_t d : t.dims) {
            put_u32(out, d);
        }
        for (float v : t.data) {
            std::uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put_u32(out, bits);
        }
    }
    return out;
}

TensorStore deserialize_tensors(std::span<const std::byte> bytes) {
    Reader r(bytes);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) {
        throw Error(ErrorCode::parse, "bad weight container magic");
    }
    if (r.u32() != kVersion) {
        throw Error(ErrorCode::unsupported_format, "unknown weight container version");
    }
    const std::uint32_t count = r.u32();
    TensorStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        if (name_len > r.remaining()) {
            throw Error(ErrorCode::bounds, "weight container truncated");
        }
        std::string name(name_len, '\0');
        r.raw(name.data(), name_len);
        Tensor t;
        const std::uint32_t ndim = r.u32();
        if (ndim > 8) {
            throw Error(ErrorCode::parse, "tensor " + name + " has too many dimensions");
        }
        std::size_t n = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
            t.dims.push_back(r.u32());
            n *= t.dims.back();
            if (n > r.remaining() / 4) {
                throw Error(ErrorCode::bounds, "tensor " + name + " runs past end of container");
            }
        }
        t.data.resize(n);
        r.raw(t.data.data(), n * 4);
        store[name] = std::move(t);
    }
    return store;
}

TensorStore seeded_tensors(const nlohmann::json& d) {
    const std::string kind = d.at("kind").get<std::string>();
    Seeded s(value_or<std::uint64_t>(d, "seed", 0));
    const bool zero_out = value_or<bool>(d, "zero_output_layers", false);
    TensorStore store;

    if (kind == "anchor_mlp") {
        const auto anchors = value_or<std::uint32_t>(d, "anchors", 64);
        const auto feature_dim = value_or<std::uint32_t>(d, "feature_dim", 8);
        const auto k = value_or<std::uint32_t>(d, "k", 4);
        const auto hidden = value_or<std::uint32_t>(d, "hidden", 16);
        const auto extent = value_or<float>(d, "extent", 1.0f);
        if (anchors == 0 || anchors > kMaxAnchors || k == 0 || feature_dim == 0 || hidden == 0) {
            throw Error(ErrorCode::invalid_input, "anchor fixture sizes out of range");
        }
        store["anchor_positions"] = s.uniform({anchors, 3}, -extent, extent);
        Tensor scales = s.uniform({anchors, 3}, 0.05f * extent, 0.15f * extent);
        store["anchor_scales"] = std::move(scales);
        store["features"] = s.normal({anchors, feature_dim}, 1.0f);
        const float gain = zero_out ? 0.0f : 1.0f;
        const std::uint32_t in = feature_dim + 3;
        add_head(store, s, "offsets", in, hidden, 3 * k, gain);
        add_head(store, s, "opacity", in, hidden, k, gain, {1.0f});
        add_head(store, s, "covariance", in, hidden, 7 * k, gain, {-1.0f, -1.0f, -1.0f, 1.0f, 0.0f, 0.0f, 0.0f});
        add_head(store, s, "color", in, hidden, 3 * k, gain);
    } else if (kind == "hexplane") {
        const auto n = value_or<std::uint32_t>(d, "gaussians", 256);
        const auto grid = value_or<int>(d, "grid", 16);
        const auto feature_dim = value_or<std::uint32_t>(d, "feature_dim", 4);
        const auto hidden = value_or<std::uint32_t>(d, "hidden", 16);
        const auto degree = value_or<int>(d, "degree", 0);
        const auto extent = value_or<float>(d, "extent", 1.0f);
        const auto amplitude = value_or<float>(d, "amplitude", 0.05f);
        if (grid < 2 || grid > kMaxGrid || feature_dim == 0 || degree < 0 || degree > kMaxShDegree) {
            throw Error(ErrorCode::invalid_input, "hexplane fixture sizes out of range");
        }
        SyntheticOptions opt;
        opt.count = n;
        opt.seed = s.rng()();
        opt.half_extent = Vec3f::Constant(extent);
        opt.degree = degree;
        add_canonical(store, synthetic_gaussians(opt), degree);
        const auto g = static_cast<std::uint32_t>(grid);
        for (const char* plane : {"plane_xy", "plane_xz", "plane_yz", "plane_xt", "plane_yt", "plane_zt"}) {
            store[plane] = s.normal({g, g, feature_dim}, 0.5f);
        }
        store["bounds"] = Tensor{{2, 3}, {-extent, -extent, -extent, extent, extent, extent}};
        const float gain = zero_out ? 0.0f : amplitude;
        add_head(store, s, "delta_position", 6 * feature_dim, hidden, 3, gain);
        add_head(store, s, "delta_rotation", 6 * feature_dim, hidden, 4, gain);
        add_head(store, s, "delta_scale", 6 * feature_dim, hidden, 3, gain);
    } else if (kind == "avatar") {
        const auto joints = value_or<std::uint32_t>(d, "joints", 8);
        const auto n = value_or<std::uint32_t>(d, "gaussians", 256);
        const auto degree = value_or<int>(d, "degree", 0);
        if (joints == 0 || joints > kMaxJoints || degree < 0 || degree > kMaxShDegree) {
            throw Error(ErrorCode::invalid_input, "avatar fixture sizes out of range");
        }
        // binary-tree skeleton with bones of length ~0.3
        Tensor parents{{joints}, {}};
        Tensor rest{{joints, 4, 4}, {}};
        std::vector<Vec3f> rest_pos(joints, Vec3f::Zero());
        std::normal_distribution<float> normal(0.0f, 1.0f);
        for (std::uint32_t j = 0; j < joints; ++j) {
            const int parent = j == 0 ? -1 : static_cast<int>((j - 1) / 2);
            parents.data.push_back(static_cast<float>(parent));
            Vec3f offset = Vec3f::Zero();
            if (j > 0) {
                offset = Vec3f(normal(s.rng()), normal(s.rng()) + 1.5f, normal(s.rng())).normalized() * 0.3f;
                rest_pos[j] = rest_pos[static_cast<std::size_t>(parent)] + offset;
            }
            Mat4f m = Mat4f::Identity();
            m.block<3, 1>(0, 3) = offset;
            for (int r = 0; r < 4; ++r) {
                for (int c = 0; c < 4; ++c) {
                    rest.data.push_back(m(r, c));
                }
            }
        }
        store["parents"] = std::move(parents);
        store["rest_local"] = std::move(rest);

        SyntheticOptions opt;
        opt.count = n;
        opt.seed = s.rng()();
        opt.half_extent = Vec3f::Constant(0.08f);
        opt.degree = degree;
        auto gs = synthetic_gaussians(opt);
        Tensor weights{{n, joints}, {}};
        for (std::uint32_t i = 0; i < n; ++i) {
            const std::uint32_t home = static_cast<std::uint32_t>(s.rng()() % joints);
            gs[i].position += rest_pos[home];
            std::vector<double> w(joints);
            double sum = 0.0;
            for (std::uint32_t j = 0; j < joints; ++j) {
                w[j] = std::exp(-static_cast<double>((gs[i].position - rest_pos[j]).squaredNorm()) / 0.02);
                sum += w[j];
            }
            for (std::uint32_t j = 0; j < joints; ++j) {
                weights.data.push_back(static_cast<float>(w[j] / sum));
            }
        }
        add_canonical(store, gs, degree);
        store["skin_weights"] = std::move(weights);
    } else {
        throw Error(ErrorCode::invalid_input, "unknown generator kind '" + kind + "'");
    }
    return store;
}

AnchorMlpGenerator make_anchor_generator(const TensorStore& store, int offsets_per_anchor) {
    const Tensor& pos = get(store, "anchor_positions", 2);
    const Tensor& scale = get(store, "anchor_scales", 2);
    const Tensor& feat = get(store, "features", 2);
    const std::uint32_t a = pos.dims[0];
    if (pos.dims[1] != 3 || scale.dims != std::vector<std::uint32_t>{a, 3} || feat.dims[0] != a) {
        throw Error(ErrorCode::schema, "anchor tensors disagree on anchor count");
    }
    AnchorSet set;
    set.offsets_per_anchor = offsets_per_anchor;
    for (std::uint32_t i = 0; i < a; ++i) {
        set.positions.emplace_back(pos.data[3 * i], pos.data[3 * i + 1], pos.data[3 * i + 2]);
        set.scales.emplace_back(scale.data[3 * i], scale.data[3 * i + 1], scale.data[3 * i + 2]);
    }
    set.features = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        feat.data.data(), feat.dims[0], feat.dims[1]);
    AnchorHeads heads{read_mlp(store, "offsets"), read_mlp(store, "opacity"), read_mlp(store, "covariance"),
                      read_mlp(store, "color")};
    return AnchorMlpGenerator(std::move(set), std::move(heads));
}

HexPlaneField make_hexplane_field(const TensorStore& store) {
    HexPlaneField field;
    const char* names[] = {"plane_xy", "plane_xz", "plane_yz", "plane_xt", "plane_yt", "plane_zt"};
    for (int p = 0; p < 6; ++p) {
        const Tensor& t = get(store, names[p], 3);
        FeaturePlane& plane = field.planes[static_cast<std::size_t>(p)];
        plane.height = static_cast<int>(t.dims[0]);
        plane.width = static_cast<int>(t.dims[1]);
        plane.features = static_cast<int>(t.dims[2]);
        if (plane.height > kMaxGrid || plane.width > kMaxGrid) {
            throw Error(ErrorCode::invalid_input, "hexplane grid larger than 64x64");
        }
        plane.data = t.data;
    }
    const Tensor& bounds = get(store, "bounds", 2);
    if (bounds.dims != std::vector<std::uint32_t>{2, 3}) {
        throw Error(ErrorCode::schema, "bounds must be 2 x 3");
    }
    field.bounds_min = Vec3f(bounds.data[0], bounds.data[1], bounds.data[2]);
    field.bounds_max = Vec3f(bounds.data[3], bounds.data[4], bounds.data[5]);
    field.canonical = read_canonical(store);
    field.delta_position = read_mlp(store, "delta_position");
    field.delta_rotation = read_mlp(store, "delta_rotation");
    field.delta_scale = read_mlp(store, "delta_scale");
    field.validate();
    return field;
}

AvatarRig make_avatar_rig(const TensorStore& store) {
    AvatarRig rig;
    const Tensor& parents = get(store, "parents", 1);
    const Tensor& rest = get(store, "rest_local", 3);
    const std::uint32_t k = parents.dims[0];
    if (k > kMaxJoints || rest.dims != std::vector<std::uint32_t>{k, 4, 4}) {
        throw Error(ErrorCode::schema, "rig tensors disagree on joint count");
    }
    for (std::uint32_t j = 0; j < k; ++j) {
        rig.parent.push_back(static_cast<int>(parents.data[j]));
        rig.rest_local.push_back(
            Eigen::Map<const Eigen::Matrix<float, 4, 4, Eigen::RowMajor>>(rest.data.data() + 16 * j));
    }
    rig.canonical = read_canonical(store);
    const Tensor& w = get(store, "skin_weights", 2);
    if (w.dims != std::vector<std::uint32_t>{static_cast<std::uint32_t>(rig.canonical.size()), k}) {
        throw Error(ErrorCode::schema, "skin_weights must be N x K");
    }
    rig.skin_weights = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        w.data.data(), w.dims[0], w.dims[1]);
    rig.validate();
    return rig;
}

std::shared_ptr<const GaussianGenerator> build_generator(const nlohmann::json& d,
                                                         const std::filesystem::path& base_dir) {
    if (!d.is_object() || !d.contains("kind")) {
        throw Error(ErrorCode::schema, "generator descriptor needs a 'kind'");
    }
    const std::string kind = d.at("kind").get<std::string>();
    if (kind == "static") {
        if (d.contains("ply")) {
            return std::make_shared<StaticGenerator>(load_splat_ply(base_dir / d.at("ply").get<std::string>()));
        }
        SyntheticOptions opt;
        opt.count = value_or<std::size_t>(d, "count", 1000);
        opt.seed = value_or<std::uint64_t>(d, "seed", 0);
        opt.degree = value_or<int>(d, "degree", 0);
        return std::make_shared<StaticGenerator>(synthetic_gaussians(opt));
    }

    TensorStore store = seeded_tensors(d);
    if (d.contains("weights")) {
        const TensorStore loaded = deserialize_tensors(read_file_bytes(base_dir / d.at("weights").get<std::string>()));
        for (const auto& [name, tensor] : loaded) {
            auto it = store.find(name);
            if (it == store.end()) {
                throw Error(ErrorCode::schema, "weight file has unknown tensor " + name);
            }
            it->second = tensor;
        }
    }
    if (kind == "anchor_mlp") {
        return std::make_shared<AnchorMlpGenerator>(make_anchor_generator(store, value_or<int>(d, "k", 4)));
    }
    if (kind == "hexplane") {
        return std::make_shared<HexPlaneGenerator>(make_hexplane_field(store));
    }
    return std::make_shared<AvatarGenerator>(make_avatar_rig(store));
}

std::shared_ptr<const GaussianGenerator> load_generator(const std::filesystem::path& descriptor_path) {
    const auto bytes = read_file_bytes(descriptor_path);
    nlohmann::json d;
    try {
        d = nlohmann::json::parse(reinterpret_cast<const char*>(bytes.data()),
                                  reinterpret_cast<const char*>(bytes.data()) + bytes.size());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::parse, descriptor_path.string() + ": " + e.what());
    }
    return build_generator(d, descriptor_path.parent_path());
}

PoseParams rest_pose(std::size_t joints) {
    PoseParams pose;
    pose.joint_rotations.assign(joints, Quat::identity());
    return pose;
}

}  // namespace hsplat
