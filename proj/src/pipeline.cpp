#include <algorithm>
#include <chrono>

#include "json.hpp"

#include "hsplat/error.hpp"
#include "hsplat/render.hpp"

namespace hsplat {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

std::size_t ModelInstance::max_count() const {
    if (generator) {
        return generator->max_count();
    }
    if (batch) {
        return batch->meta.count;
    }
    return packed ? packed->count : 0;
}

int ModelInstance::degree() const {
    if (generator) {
        return generator->degree();
    }
    if (batch) {
        return batch->meta.degree;
    }
    return packed ? packed->degree : 0;
}

const ModelInstance* Scene::find(std::uint32_t model_id) const {
    for (const auto& m : models) {
        if (m.model_id == model_id) {
            return &m;
        }
    }
    return nullptr;
}

ModelInstance* Scene::find(std::uint32_t model_id) {
    return const_cast<ModelInstance*>(std::as_const(*this).find(model_id));
}

std::size_t Scene::max_gaussians() const {
    std::size_t n = 0;
    for (const auto& m : models) {
        n += m.max_count();
    }
    return n;
}

std::string frame_stats_json(const FrameStats& s, std::optional<std::uint64_t> inversions) {
    nlohmann::json j = {{"generate_ms", s.generate_ms},   {"preprocess_ms", s.preprocess_ms},
                        {"sort_ms", s.sort_ms},           {"draw_ms", s.draw_ms},
                        {"total_ms", s.total_ms},         {"splats_in", s.splats_in},
                        {"splats_visible", s.splats_visible}};
    if (inversions) {
        j["inversions"] = *inversions;
    }
    return j.dump();
}

Renderer::Renderer(SortStrategy strategy, RenderOptions options) : options_(options) { set_strategy(strategy); }

void Renderer::set_strategy(SortStrategy strategy) {
    strategy_ = strategy;
    lazy_.reset();
    lazy_.period = strategy.period;
}

FrameResult Renderer::render(const Scene& scene, const Camera& cam, const GeneratorInputs& inputs) {
    if (scene.models.empty()) {
        throw Error(ErrorCode::invalid_input, "scene has no models");
    }
    cam.validate();
    std::vector<const ModelInstance*> models;
    for (const auto& m : scene.models) {
        models.push_back(&m);
    }
    std::stable_sort(models.begin(), models.end(),
                     [](const ModelInstance* a, const ModelInstance* b) { return a->model_id < b->model_id; });
    for (std::size_t i = 1; i < models.size(); ++i) {
        if (models[i]->model_id == models[i - 1]->model_id) {
            throw Error(ErrorCode::invalid_input, "duplicate model_id " + std::to_string(models[i]->model_id));
        }
    }

    FrameResult result;
    FrameStats& stats = result.stats;
    const auto t0 = Clock::now();

    // generate
    std::vector<GaussianBatch> batches(models.size());
    std::vector<PackedSplatBuffer> packed(models.size());
    for (std::size_t m = 0; m < models.size(); ++m) {
        const ModelInstance& inst = *models[m];
        if (inst.generator) {
            batches[m] = generate(*inst.generator, inputs);
            if (inst.precision == Precision::fp16) {
                packed[m] = pack_batch(batches[m]);
            }
            stats.splats_in += batches[m].meta.count;
        } else {
            stats.splats_in += inst.max_count();
        }
    }
    const auto t1 = Clock::now();

    // preprocess into one global accumulator, model_id order
    splats_.clear();
    for (std::size_t m = 0; m < models.size(); ++m) {
        const ModelInstance& inst = *models[m];
        if (inst.generator && inst.precision == Precision::fp16) {
            preprocess_packed(packed[m], inst.model_id, inst.transform, cam, splats_, options_.workers);
        } else {
            preprocess_instance(inst, inst.generator ? &batches[m] : nullptr, cam, splats_, options_.workers);
        }
    }
    stats.splats_visible = splats_.size();
    const auto t2 = Clock::now();

    // sort (ascending depth), then flip for back-to-front drawing
    switch (strategy_.kind) {
    case SortStrategy::Kind::global: order_ = radix_sort(splats_.keys); break;
    case SortStrategy::Kind::lazy: {
        std::vector<std::uint64_t> origins(splats_.size());
        for (std::size_t i = 0; i < origins.size(); ++i) {
            origins[i] = splats_.splats[i].origin();
        }
        order_ = lazy_sort_step(lazy_, splats_.keys, origins);
        break;
    }
    case SortStrategy::Kind::local: order_ = local_sort(splats_.keys, strategy_.partition_size); break;
    }
    std::vector<std::uint32_t> draw_order(order_.rbegin(), order_.rend());
    const auto t3 = Clock::now();

    // mesh prepass, rasterize, post-process
    const DepthBuffer depth = mesh_depth_prepass(scene.mesh ? &*scene.mesh : nullptr, scene.mesh_transform, cam);
    RasterOptions raster;
    raster.workers = options_.workers;
    raster.verify_order = raster.verify_order && strategy_.kind == SortStrategy::Kind::global;
    result.image = rasterize_sorted(splats_.splats, draw_order, depth, scene.background, raster);
    if (!options_.skip_postprocess && !scene.filters.empty()) {
        result.image = postprocess_apply(result.image, scene.filters);
    }
    const auto t4 = Clock::now();

    stats.generate_ms = ms_between(t0, t1);
    stats.preprocess_ms = ms_between(t1, t2);
    stats.sort_ms = ms_between(t2, t3);
    stats.draw_ms = ms_between(t3, t4);
    stats.total_ms = ms_between(t0, t4);

    if (options_.count_inversions) {
        result.inversions = count_inversions(order_, splats_.keys);
    }
    return result;
}

FrameResult render_frame(const Scene& scene, const Camera& cam, const GeneratorInputs& inputs,
                         const SortStrategy& strategy) {
    Renderer r(strategy);
    return r.render(scene, cam, inputs);
}

}  // namespace hsplat
