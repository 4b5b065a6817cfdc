#include "matclip/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "matclip/io.hpp"

namespace matclip {

void TrainConfig::validate() const {
    if (batch_size < 1) throw InvalidConfig("batch_size must be >= 1");
    if (!(learning_rate > 0.0f)) throw InvalidConfig("learning_rate must be > 0");
    if (steps < 0) throw InvalidConfig("steps must be >= 0");
}

namespace {

template <typename T>
std::vector<std::pair<T*, std::size_t>> flat_tensors(EncoderParamsT<T>& p) {
    std::vector<std::pair<T*, std::size_t>> out;
    for_each_tensor(p, [&](const std::string&, T* data, std::size_t n,
                           std::vector<std::uint32_t>) { out.emplace_back(data, n); });
    return out;
}

}  // namespace

template <typename T>
void adam_step(EncoderParamsT<T>& params, const EncoderParamsT<T>& grads,
               AdamStateT<T>& state, T lr, T beta1, T beta2, T eps, T weight_decay) {
    state.step += 1;
    const T bc1 = T(1) - std::pow(beta1, T(state.step));
    const T bc2 = T(1) - std::pow(beta2, T(state.step));

    auto pt = flat_tensors(params);
    auto gt = flat_tensors(const_cast<EncoderParamsT<T>&>(grads));
    auto mt = flat_tensors(state.m);
    auto vt = flat_tensors(state.v);
    for (std::size_t k = 0; k < pt.size(); ++k) {
        T* p = pt[k].first;
        const T* g = gt[k].first;
        T* m = mt[k].first;
        T* v = vt[k].first;
        const std::size_t n = pt[k].second;
        for (std::size_t i = 0; i < n; ++i) {
            m[i] = beta1 * m[i] + (T(1) - beta1) * g[i];
            v[i] = beta2 * v[i] + (T(1) - beta2) * g[i] * g[i];
            const T mhat = m[i] / bc1;
            const T vhat = v[i] / bc2;
            p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p[i]);
        }
    }
}

template void adam_step<float>(EncoderParamsT<float>&, const EncoderParamsT<float>&,
                               AdamStateT<float>&, float, float, float, float, float);
template void adam_step<double>(EncoderParamsT<double>&, const EncoderParamsT<double>&,
                                AdamStateT<double>&, double, double, double, double, double);

SplitAssignment split_by_object(const Dataset& dataset, double test_fraction,
                                std::uint64_t seed) {
    if (dataset.parts.empty()) throw SchemaError("cannot split an empty manifest");
    if (test_fraction < 0.0 || test_fraction > 1.0)
        throw InvalidConfig("test_fraction must lie in [0, 1]");

    std::vector<std::string> objects;
    std::unordered_set<std::string> seen;
    for (const auto& part : dataset.parts) {
        if (seen.insert(part.object_id).second) objects.push_back(part.object_id);
    }

    Rng rng(seed);
    for (std::size_t i = objects.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(objects[i - 1], objects[j]);
    }

    // round half up
    const std::size_t n_test = static_cast<std::size_t>(
        std::floor(test_fraction * static_cast<double>(objects.size()) + 0.5));

    SplitAssignment split;
    for (std::size_t i = 0; i < objects.size(); ++i)
        split.by_object[objects[i]] = i < n_test ? Split::kTest : Split::kTrain;
    return split;
}

BatchIndices sample_batch(const Dataset& dataset, Split split, int batch_size, Rng& rng) {
    std::vector<int> pool;
    for (std::size_t i = 0; i < dataset.parts.size(); ++i)
        if (dataset.parts[i].split == split) pool.push_back(static_cast<int>(i));

    for (std::size_t i = pool.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(pool[i - 1], pool[j]);
    }

    BatchIndices batch;
    std::unordered_set<std::string> used;
    for (int idx : pool) {
        const auto& part = dataset.parts[static_cast<std::size_t>(idx)];
        if (!used.insert(part.truth_material_id).second) continue;
        auto it = dataset.material_index.find(part.truth_material_id);
        if (it == dataset.material_index.end())
            throw SchemaError("part references unknown material: " + part.truth_material_id);
        batch.parts.push_back(idx);
        batch.materials.push_back(it->second);
        if (static_cast<int>(batch.parts.size()) == batch_size) return batch;
    }
    throw InsufficientDistinctMaterials(
        "split holds fewer than batch_size parts with distinct materials");
}

namespace {

const float kLogitScaleCap = std::log(kMaxLogitScale);

TrainResult run_loop(const TrainConfig& config, const Dataset& dataset, TrainerState state) {
    config.validate();
    Rng rng;
    rng.set_state(state.rng_state);

    TrainResult result;
    while (state.opt.step < static_cast<std::uint32_t>(config.steps)) {
        BatchIndices batch = sample_batch(dataset, Split::kTrain, config.batch_size, rng);
        std::vector<const MaterialViewSet*> mats;
        std::vector<const PartSample*> parts;
        mats.reserve(batch.materials.size());
        parts.reserve(batch.parts.size());
        for (int i : batch.materials) mats.push_back(&dataset.materials[static_cast<std::size_t>(i)]);
        for (int i : batch.parts) parts.push_back(&dataset.parts[static_cast<std::size_t>(i)]);

        BatchResult<float> step = batch_forward_backward(state.params, mats, parts);
        if (!std::isfinite(step.loss))
            throw NonFiniteLoss("non-finite loss at step " + std::to_string(state.opt.step + 1));

        adam_step(state.params, step.grads, state.opt, config.learning_rate, config.beta1,
                  config.beta2, config.eps, config.weight_decay);
        state.params.logit_scale = std::min(state.params.logit_scale, kLogitScaleCap);
        result.history.emplace_back(state.opt.step, step.loss);
    }

    state.rng_state = rng.state();
    result.state = std::move(state);
    return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& dataset,
                  const EncoderParams& init) {
    TrainerState state;
    state.params = init;
    state.opt = make_adam_state<float>(init.cfg);
    state.rng_state = Rng(config.seed).state();
    return run_loop(config, dataset, std::move(state));
}

TrainResult train_continue(const TrainConfig& config, const Dataset& dataset,
                           TrainerState state) {
    return run_loop(config, dataset, std::move(state));
}

// --- checkpoints -------------------------------------------------------------

namespace {

struct TensorRecord {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> data;
};

void append_tensor(std::string& buf, const std::string& name,
                   const std::vector<std::uint32_t>& dims, const float* data, std::size_t n) {
    detail::put_u32(buf, static_cast<std::uint32_t>(name.size()));
    buf += name;
    detail::put_u32(buf, static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) detail::put_u32(buf, d);
    for (std::size_t i = 0; i < n; ++i) detail::put_f32(buf, data[i]);
}

void append_params(std::string& buf, const EncoderParams& p, const std::string& prefix,
                   std::uint32_t& count) {
    for_each_tensor(p, [&](const std::string& name, const float* data, std::size_t n,
                           std::vector<std::uint32_t> dims) {
        append_tensor(buf, prefix + name, dims, data, n);
        ++count;
    });
}

// model dims ride along as an exact-integer f32 tensor so a checkpoint is
// self-describing
std::vector<float> config_tensor(const ModelConfig& cfg) {
    return {static_cast<float>(cfg.d_in),    static_cast<float>(cfg.d_model),
            static_cast<float>(cfg.d_ff),    static_cast<float>(cfg.n_heads),
            static_cast<float>(cfg.n_layers), static_cast<float>(cfg.d_emb),
            static_cast<float>(cfg.n_views)};
}

ModelConfig config_from_tensor(const std::vector<float>& v, const std::string& path) {
    if (v.size() != 7) throw SchemaError(path + ": malformed config tensor");
    ModelConfig cfg;
    cfg.d_in = static_cast<int>(v[0]);
    cfg.d_model = static_cast<int>(v[1]);
    cfg.d_ff = static_cast<int>(v[2]);
    cfg.n_heads = static_cast<int>(v[3]);
    cfg.n_layers = static_cast<int>(v[4]);
    cfg.d_emb = static_cast<int>(v[5]);
    cfg.n_views = static_cast<int>(v[6]);
    return cfg;
}

std::vector<TensorRecord> read_mcpt(const std::string& path) {
    const auto bytes = detail::read_file(path);
    const std::uint8_t* p = bytes.data();
    const std::uint8_t* end = p + bytes.size();
    if (bytes.size() < 4 || std::memcmp(p, "MCPT", 4) != 0)
        throw BadMagic(path + ": not an MCPT checkpoint");
    p += 4;
    const std::uint32_t version = detail::get_u32(p, end, path);
    if (version != kCheckpointVersion)
        throw VersionMismatch(path + ": unsupported checkpoint version " +
                              std::to_string(version));
    const std::uint32_t count = detail::get_u32(p, end, path);
    std::vector<TensorRecord> records;
    records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        TensorRecord rec;
        const std::uint32_t name_len = detail::get_u32(p, end, path);
        if (static_cast<std::size_t>(end - p) < name_len)
            throw IoError(path + ": truncated file");
        rec.name.assign(reinterpret_cast<const char*>(p), name_len);
        p += name_len;
        const std::uint32_t rank = detail::get_u32(p, end, path);
        std::uint64_t total = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            rec.dims.push_back(detail::get_u32(p, end, path));
            total *= rec.dims.back();
        }
        rec.data.resize(total);
        for (auto& v : rec.data) v = detail::get_f32(p, end, path);
        records.push_back(std::move(rec));
    }
    return records;
}

void write_mcpt(const std::string& path, const std::string& body, std::uint32_t count) {
    std::string buf;
    buf += "MCPT";
    detail::put_u32(buf, kCheckpointVersion);
    detail::put_u32(buf, count);
    buf += body;
    AtomicFile file(path);
    detail::write_file(file.temp_path(), buf);
    file.commit();
}

// Fills params from named records; every parameter tensor must be present
// with the exact element count.
void fill_params(EncoderParams& params, const std::vector<TensorRecord>& records,
                 const std::string& prefix, const std::string& path) {
    std::size_t filled = 0;
    for_each_tensor(params, [&](const std::string& name, float* data, std::size_t n,
                                std::vector<std::uint32_t>) {
        const std::string want = prefix + name;
        for (const auto& rec : records) {
            if (rec.name != want) continue;
            if (rec.data.size() != n)
                throw ShapeMismatch(path + ": tensor " + want + " has wrong size");
            std::memcpy(data, rec.data.data(), n * sizeof(float));
            ++filled;
            return;
        }
        throw SchemaError(path + ": missing tensor " + want);
    });
    (void)filled;
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::string& path) {
    std::string body;
    std::uint32_t count = 0;
    const auto cfg = config_tensor(params.cfg);
    append_tensor(body, "config", {static_cast<std::uint32_t>(cfg.size())}, cfg.data(), cfg.size());
    ++count;
    append_params(body, params, "", count);
    write_mcpt(path, body, count);
}

EncoderParams load_checkpoint(const std::string& path) {
    const auto records = read_mcpt(path);
    for (const auto& rec : records) {
        if (rec.name == "config") {
            EncoderParams params = make_params<float>(config_from_tensor(rec.data, path));
            fill_params(params, records, "", path);
            return params;
        }
    }
    throw SchemaError(path + ": missing config tensor");
}

void save_trainer_state(const TrainerState& state, const std::string& path) {
    std::string body;
    std::uint32_t count = 0;
    const auto cfg = config_tensor(state.params.cfg);
    append_tensor(body, "config", {static_cast<std::uint32_t>(cfg.size())}, cfg.data(), cfg.size());
    ++count;
    append_params(body, state.params, "", count);
    append_params(body, state.opt.m, "opt.m.", count);
    append_params(body, state.opt.v, "opt.v.", count);

    const float step_f = static_cast<float>(state.opt.step);  // exact below 2^24
    append_tensor(body, "opt.step", {1}, &step_f, 1);
    ++count;

    // u64 rng state bit-cast into two f32 lanes; round-trips exactly because
    // nothing arithmetic ever touches these values
    const std::uint32_t lo = static_cast<std::uint32_t>(state.rng_state & 0xffffffffull);
    const std::uint32_t hi = static_cast<std::uint32_t>(state.rng_state >> 32);
    const float rng_f[2] = {std::bit_cast<float>(lo), std::bit_cast<float>(hi)};
    append_tensor(body, "rng.state", {2}, rng_f, 2);
    ++count;

    write_mcpt(path, body, count);
}

TrainerState load_trainer_state(const std::string& path) {
    const auto records = read_mcpt(path);
    const TensorRecord* cfg_rec = nullptr;
    const TensorRecord* step_rec = nullptr;
    const TensorRecord* rng_rec = nullptr;
    for (const auto& rec : records) {
        if (rec.name == "config") cfg_rec = &rec;
        if (rec.name == "opt.step") step_rec = &rec;
        if (rec.name == "rng.state") rng_rec = &rec;
    }
    if (!cfg_rec) throw SchemaError(path + ": missing config tensor");
    if (!step_rec || !rng_rec)
        throw SchemaError(path + ": checkpoint has no optimizer state; cannot resume");

    const ModelConfig cfg = config_from_tensor(cfg_rec->data, path);
    TrainerState state;
    state.params = make_params<float>(cfg);
    state.opt = make_adam_state<float>(cfg);
    fill_params(state.params, records, "", path);
    fill_params(state.opt.m, records, "opt.m.", path);
    fill_params(state.opt.v, records, "opt.v.", path);
    state.opt.step = static_cast<std::uint32_t>(step_rec->data.at(0));
    if (rng_rec->data.size() != 2) throw SchemaError(path + ": malformed rng.state tensor");
    const std::uint32_t lo = std::bit_cast<std::uint32_t>(rng_rec->data[0]);
    const std::uint32_t hi = std::bit_cast<std::uint32_t>(rng_rec->data[1]);
    state.rng_state = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return state;
}

bool params_bitwise_equal(const EncoderParams& a, const EncoderParams& b) {
    std::vector<std::pair<const float*, std::size_t>> ta, tb;
    for_each_tensor(a, [&](const std::string&, const float* d, std::size_t n,
                           std::vector<std::uint32_t>) { ta.emplace_back(d, n); });
    for_each_tensor(b, [&](const std::string&, const float* d, std::size_t n,
                           std::vector<std::uint32_t>) { tb.emplace_back(d, n); });
    if (ta.size() != tb.size()) return false;
    for (std::size_t i = 0; i < ta.size(); ++i) {
        if (ta[i].second != tb[i].second) return false;
        if (std::memcmp(ta[i].first, tb[i].first, ta[i].second * sizeof(float)) != 0)
            return false;
    }
    return true;
}

}  // namespace matclip
