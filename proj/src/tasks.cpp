// SPDX-License-Identifier: Apache-2.0
#include "metalr/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "metalr/common.hpp"

namespace metalr {

Shape Dataset::sample_shape() const {
    check(inputs.rank() >= 1, "Dataset: inputs must have a batch axis");
    Shape s(inputs.shape().begin() + 1, inputs.shape().end());
    return s;
}

void Dataset::validate() const {
    check(inputs.rank() >= 1 && labels.rank() >= 1, "Dataset '" + name + "': empty tensors");
    check(inputs.dim(0) == labels.size(), "Dataset '", name, "': ", inputs.dim(0), " inputs vs ",
          labels.size(), " labels");
    if (num_classes > 0) {
        for (std::size_t i = 0; i < labels.size(); ++i) {
            const double l = labels[i];
            check(l == std::floor(l) && l >= 0.0 && l < static_cast<double>(num_classes), "Dataset '", name,
                  "': label ", l, " at row ", i, " invalid for ", num_classes, " classes");
        }
    }
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices, const std::string& new_name) const {
    check(!indices.empty(), "Dataset::subset: empty index set");
    const Shape sample = sample_shape();
    const std::size_t stride = numel(sample);
    Shape out_shape = inputs.shape();
    out_shape[0] = indices.size();
    Tensor out_inputs(out_shape);
    Tensor out_labels({indices.size()});
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const std::size_t src = indices[r];
        check(src < size(), "Dataset::subset: index ", src, " out of range for N=", size());
        std::copy(inputs.data() + src * stride, inputs.data() + (src + 1) * stride,
                  out_inputs.data() + r * stride);
        out_labels[r] = labels[src];
    }
    Dataset d{std::move(out_inputs), std::move(out_labels), num_classes, new_name};
    return d;
}

Dataset Dataset::concat(const Dataset& a, const Dataset& b, const std::string& new_name) {
    check(a.sample_shape() == b.sample_shape(), "Dataset::concat: sample shapes differ, ",
          shape_to_string(a.sample_shape()), " vs ", shape_to_string(b.sample_shape()));
    check(a.num_classes == b.num_classes, "Dataset::concat: class counts differ");
    Shape out_shape = a.inputs.shape();
    out_shape[0] = a.size() + b.size();
    Tensor inputs(out_shape);
    Tensor labels({a.size() + b.size()});
    std::copy(a.inputs.values().begin(), a.inputs.values().end(), inputs.data());
    std::copy(b.inputs.values().begin(), b.inputs.values().end(), inputs.data() + a.inputs.size());
    std::copy(a.labels.values().begin(), a.labels.values().end(), labels.data());
    std::copy(b.labels.values().begin(), b.labels.values().end(), labels.data() + a.labels.size());
    return Dataset{std::move(inputs), std::move(labels), a.num_classes, new_name};
}

Dataset TransferTask::target_train_pool() const {
    return Dataset::concat(target_train, target_val, target_train.name + "+val");
}

namespace {

void validate_synth_params(const SynthTaskParams& p) {
    check(p.input_dim >= 2, "synth task: input_dim must be >= 2, got ", p.input_dim);
    check(p.feature_dim >= 1 && p.feature_dim <= p.input_dim, "synth task: feature_dim must be in [1, ",
          p.input_dim, "], got ", p.feature_dim);
    check(p.classes >= 2, "synth task: need >= 2 classes, got ", p.classes);
    check(p.n_source > 0 && p.n_target > 0 && p.n_target_test > 0, "synth task: sample counts must be positive");
    check(p.noise >= 0.0 && p.noise <= 1.0, "synth task: noise must be in [0,1], got ", p.noise);
    check(p.val_fraction > 0.0 && p.val_fraction < 1.0, "synth task: val_fraction must be in (0,1)");
    check(p.head_correlation >= 0.0 && p.head_correlation < 1.0,
          "synth task: head_correlation must be in [0,1), got ", p.head_correlation);
}

SynthTaskInternals make_internals(const SynthTaskParams& p) {
    Rng rng(mix_seed(p.seed, "synth-structure"));
    SynthTaskInternals out;
    out.feature_projection = Tensor({p.feature_dim, p.input_dim});
    for (std::size_t r = 0; r < p.feature_dim; ++r) {
        double norm2 = 0.0;
        double* row = out.feature_projection.data() + r * p.input_dim;
        for (std::size_t c = 0; c < p.input_dim; ++c) {
            row[c] = rng.normal();
            norm2 += row[c] * row[c];
        }
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t c = 0; c < p.input_dim; ++c) row[c] *= inv;
    }
    out.source_head = Tensor({p.classes, p.feature_dim});
    for (double& v : out.source_head.values()) v = rng.normal();
    out.target_head = Tensor({p.classes, p.feature_dim});
    const double c = p.head_correlation;
    const double mix = std::sqrt(1.0 - c * c);
    for (std::size_t i = 0; i < out.target_head.size(); ++i) {
        out.target_head[i] = c * out.source_head[i] + mix * rng.normal();
    }
    return out;
}

// z = relu(W* x) for one sample.
void shared_features_row(const Tensor& projection, const double* x, double* z) {
    const std::size_t m = projection.dim(0);
    const std::size_t p = projection.dim(1);
    for (std::size_t r = 0; r < m; ++r) {
        double s = 0.0;
        const double* row = projection.data() + r * p;
        for (std::size_t c = 0; c < p; ++c) s += row[c] * x[c];
        z[r] = s > 0.0 ? s : 0.0;
    }
}

std::size_t head_label(const Tensor& head, const double* z) {
    const std::size_t classes = head.dim(0);
    const std::size_t m = head.dim(1);
    std::size_t best = 0;
    double best_v = -HUGE_VAL;
    for (std::size_t c = 0; c < classes; ++c) {
        double s = 0.0;
        const double* row = head.data() + c * m;
        for (std::size_t j = 0; j < m; ++j) s += row[j] * z[j];
        if (s > best_v) {
            best_v = s;
            best = c;
        }
    }
    return best;
}

Dataset sample_domain(const SynthTaskParams& p, const SynthTaskInternals& internals, const Tensor& head,
                      std::size_t n, std::uint64_t seed, const std::string& name) {
    Rng rng(seed);
    Tensor inputs({n, p.input_dim});
    Tensor labels({n});
    std::vector<double> z(p.feature_dim);
    for (std::size_t i = 0; i < n; ++i) {
        double* x = inputs.data() + i * p.input_dim;
        for (std::size_t c = 0; c < p.input_dim; ++c) x[c] = rng.normal();
        shared_features_row(internals.feature_projection, x, z.data());
        std::size_t label = head_label(head, z.data());
        if (p.noise > 0.0 && rng.uniform() < p.noise) {
            // flip to a uniformly chosen different class
            const std::size_t shift = 1 + rng.below(p.classes - 1);
            label = (label + shift) % p.classes;
        }
        labels[i] = static_cast<double>(label);
    }
    return Dataset{std::move(inputs), std::move(labels), p.classes, name};
}

}  // namespace

SynthTaskInternals synth_task_internals(const SynthTaskParams& params) {
    validate_synth_params(params);
    return make_internals(params);
}

Tensor synth_shared_features(const SynthTaskParams& params, const Tensor& inputs) {
    const SynthTaskInternals internals = synth_task_internals(params);
    check(inputs.rank() == 2 && inputs.dim(1) == params.input_dim,
          "synth_shared_features: inputs must be [n, ", params.input_dim, "]");
    const std::size_t n = inputs.dim(0);
    Tensor z({n, params.feature_dim});
    for (std::size_t i = 0; i < n; ++i) {
        shared_features_row(internals.feature_projection, inputs.data() + i * params.input_dim,
                            z.data() + i * params.feature_dim);
    }
    return z;
}

TransferTask synth_shared_features_task(const SynthTaskParams& p) {
    validate_synth_params(p);
    const SynthTaskInternals internals = make_internals(p);

    TransferTask task;
    task.source = sample_domain(p, internals, internals.source_head, p.n_source,
                                mix_seed(p.seed, "synth-source"), "synth-source");
    Dataset target_pool = sample_domain(p, internals, internals.target_head, p.n_target,
                                        mix_seed(p.seed, "synth-target"), "synth-target");
    task.target_test = sample_domain(p, internals, internals.target_head, p.n_target_test,
                                     mix_seed(p.seed, "synth-target-test"), "synth-target-test");
    auto [train, val] = split_train_validation(target_pool, p.val_fraction, mix_seed(p.seed, "synth-split"));
    task.target_train = std::move(train);
    task.target_val = std::move(val);
    task.transferability_note =
        "shared feature projection transfers across domains; label heads are only partially "
        "correlated, so the final layer must be relearned on the target";
    return task;
}

std::pair<Dataset, Dataset> split_train_validation(const Dataset& dataset, double fraction,
                                                   std::uint64_t seed) {
    check(fraction > 0.0 && fraction < 1.0, "split_train_validation: fraction must be in (0,1), got ",
          fraction);
    const std::size_t n = dataset.size();
    const auto n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    const std::size_t n_train = n - n_val;
    check(n_val > 0 && n_train > 0, "split_train_validation: empty side (N=", n, ", fraction=", fraction,
          ")");
    Rng rng(seed);
    std::vector<std::size_t> perm = rng.permutation(n);
    std::vector<std::size_t> train_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> val_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());
    return {dataset.subset(train_idx, dataset.name + "-train"), dataset.subset(val_idx, dataset.name + "-val")};
}

BatchStream::BatchStream(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed)
    : dataset_(&dataset), batch_size_(batch_size), rng_(seed) {
    check(batch_size_ > 0, "BatchStream: batch size must be positive");
    check(batch_size_ <= dataset.size(), "BatchStream: batch size ", batch_size_, " exceeds dataset size ",
          dataset.size());
    order_ = rng_.permutation(dataset.size());
}

void BatchStream::reshuffle_now() {
    order_ = rng_.permutation(dataset_->size());
    cursor_ = 0;
}

Batch BatchStream::next() {
    if (cursor_ + batch_size_ > order_.size()) {
        // drop-last: the tail shorter than one batch is skipped this epoch
        reshuffle_now();
    }
    std::vector<std::size_t> idx(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_size_));
    cursor_ += batch_size_;
    return gather_batch(*dataset_, idx);
}

Batch gather_batch(const Dataset& dataset, const std::vector<std::size_t>& indices) {
    Dataset sub = dataset.subset(indices, dataset.name + "-batch");
    return Batch{std::move(sub.inputs), std::move(sub.labels), indices};
}

// ---------------------------------------------------------------------------
// IDX ingestion (big-endian dims, unsigned-byte payload)

namespace {

std::uint32_t read_be_u32(std::istream& is, const std::string& path, const char* what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    check_state(is.gcount() == 4, "IDX '", path, "': truncated while reading ", what);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_be_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    os.write(reinterpret_cast<char*>(b), 4);
}

std::vector<unsigned char> read_payload(std::istream& is, std::size_t n, const std::string& path) {
    std::vector<unsigned char> buf(n);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    check_state(static_cast<std::size_t>(is.gcount()) == n, "IDX '", path, "': truncated payload (expected ",
                n, " bytes, got ", is.gcount(), ")");
    return buf;
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path, const std::string& name) {
    std::ifstream img(images_path, std::ios::binary);
    check_state(img.good(), "IDX: cannot open '", images_path, "'");
    const std::uint32_t img_magic = read_be_u32(img, images_path, "magic");
    check_state(img_magic == 0x00000803u, "IDX '", images_path,
                "': malformed header, expected unsigned-byte rank-3 magic 0x00000803, got ", img_magic);
    const std::uint32_t n = read_be_u32(img, images_path, "sample count");
    const std::uint32_t h = read_be_u32(img, images_path, "height");
    const std::uint32_t w = read_be_u32(img, images_path, "width");
    check_state(n > 0 && h > 0 && w > 0, "IDX '", images_path, "': malformed header, zero dimension");
    const std::vector<unsigned char> pixels =
        read_payload(img, static_cast<std::size_t>(n) * h * w, images_path);

    std::ifstream lab(labels_path, std::ios::binary);
    check_state(lab.good(), "IDX: cannot open '", labels_path, "'");
    const std::uint32_t lab_magic = read_be_u32(lab, labels_path, "magic");
    check_state(lab_magic == 0x00000801u, "IDX '", labels_path,
                "': malformed header, expected unsigned-byte rank-1 magic 0x00000801, got ", lab_magic);
    const std::uint32_t ln = read_be_u32(lab, labels_path, "label count");
    check_state(ln == n, "IDX: label count ", ln, " does not match image count ", n);
    const std::vector<unsigned char> raw_labels = read_payload(lab, ln, labels_path);

    Tensor inputs({n, h, w});
    for (std::size_t i = 0; i < pixels.size(); ++i) inputs[i] = static_cast<double>(pixels[i]) / 255.0;
    Tensor labels({n});
    unsigned char max_label = 0;
    for (std::size_t i = 0; i < raw_labels.size(); ++i) {
        labels[i] = static_cast<double>(raw_labels[i]);
        max_label = std::max(max_label, raw_labels[i]);
    }
    Dataset d{std::move(inputs), std::move(labels), static_cast<std::size_t>(max_label) + 1, name};
    d.validate();
    return d;
}

void write_idx(const Dataset& dataset, const std::string& images_path, const std::string& labels_path) {
    const Shape sample = dataset.sample_shape();
    check(sample.size() == 2, "write_idx: dataset samples must be rank-2 images, got ",
          shape_to_string(sample));
    std::ofstream img(images_path, std::ios::binary);
    check_state(img.good(), "write_idx: cannot open '", images_path, "'");
    write_be_u32(img, 0x00000803u);
    write_be_u32(img, static_cast<std::uint32_t>(dataset.size()));
    write_be_u32(img, static_cast<std::uint32_t>(sample[0]));
    write_be_u32(img, static_cast<std::uint32_t>(sample[1]));
    for (double v : dataset.inputs.values()) {
        check(v >= 0.0 && v <= 1.0, "write_idx: pixel value ", v, " outside [0,1]");
        const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
        img.write(reinterpret_cast<const char*>(&byte), 1);
    }
    std::ofstream lab(labels_path, std::ios::binary);
    check_state(lab.good(), "write_idx: cannot open '", labels_path, "'");
    write_be_u32(lab, 0x00000801u);
    write_be_u32(lab, static_cast<std::uint32_t>(dataset.size()));
    for (double v : dataset.labels.values()) {
        const auto byte = static_cast<unsigned char>(v);
        lab.write(reinterpret_cast<const char*>(&byte), 1);
    }
}

// ---------------------------------------------------------------------------
// headered CSV: label,f1,...,fk

Dataset load_csv(const std::string& path, std::size_t num_classes, const std::string& name) {
    std::ifstream is(path);
    check_state(is.good(), "CSV: cannot open '", path, "'");
    std::string line;
    check_state(static_cast<bool>(std::getline(is, line)), "CSV '", path, "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    check_state(line.rfind("label,", 0) == 0, "CSV '", path,
                "': malformed header, expected 'label,f1,...', got '", line, "'");
    const std::size_t k = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) ;
    check_state(k >= 1, "CSV '", path, "': header declares no feature columns");

    std::vector<double> features;
    std::vector<double> labels;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                fail("CSV '", path, "' line ", line_no, ": cannot parse '", cell, "' as a number");
            }
            check_state(pos == cell.size(), "CSV '", path, "' line ", line_no, ": trailing junk in '", cell,
                        "'");
            if (col == 0) {
                labels.push_back(v);
            } else {
                features.push_back(v);
            }
            ++col;
        }
        check_state(col == k + 1, "CSV '", path, "' line ", line_no, ": expected ", k + 1, " columns, got ",
                    col);
    }
    check_state(!labels.empty(), "CSV '", path, "': no data rows");
    const std::size_t n = labels.size();
    std::size_t classes = num_classes;
    if (classes == 0) {
        double max_label = 0.0;
        for (double l : labels) max_label = std::max(max_label, l);
        classes = static_cast<std::size_t>(max_label) + 1;
    }
    for (std::size_t i = 0; i < n; ++i) {
        check_state(labels[i] == std::floor(labels[i]) && labels[i] >= 0.0 &&
                        labels[i] < static_cast<double>(classes),
                    "CSV '", path, "' row ", i + 1, ": label ", labels[i], " out of range for ", classes,
                    " classes");
    }
    Dataset d{Tensor({n, k}, std::move(features)), Tensor({n}, std::move(labels)), classes, name};
    d.validate();
    return d;
}

void write_csv(const Dataset& dataset, const std::string& path) {
    const Shape sample = dataset.sample_shape();
    const std::size_t k = numel(sample);
    std::ofstream os(path);
    check_state(os.good(), "write_csv: cannot open '", path, "'");
    os << "label";
    for (std::size_t j = 1; j <= k; ++j) os << ",f" << j;
    os << "\n";
    char buf[32];
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", dataset.labels[i]);
        os << buf;
        for (std::size_t j = 0; j < k; ++j) {
            std::snprintf(buf, sizeof buf, "%.17g", dataset.inputs[i * k + j]);
            os << "," << buf;
        }
        os << "\n";
    }
    check_state(os.good(), "write_csv: write failure on '", path, "'");
}

}  // namespace metalr
