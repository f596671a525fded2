#include "attfc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace attfc {

namespace {

constexpr std::string_view kCheckpointMagic = "ATTFCCKP";
constexpr std::string_view kDatasetMagic = "ATTFCDS1";
constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
public:
    void raw(std::string_view bytes) { out_.append(bytes); }

    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            u8(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

    void str(std::string_view s) {
        u64(s.size());
        raw(s);
    }

    void f64s(std::span<const double> values) {
        u64(values.size());
        for (double v : values) {
            f64(v);
        }
    }

    void mat(const Mat& m) {
        u64(m.rows());
        u64(m.cols());
        for (double v : m.values()) {
            f64(v);
        }
    }

    void encoder(const EncoderParams& p) {
        u64(p.widths().size());
        for (std::size_t w : p.widths()) {
            u64(w);
        }
        f64s(p.values());
    }

    void optimizer(const OptimizerState& o) {
        f64s(o.velocity);
        f64(o.lr0);
        f64(o.momentum);
        f64(o.weight_decay);
        u8(o.schedule == LrSchedule::cosine ? 0 : 1);
        u64(o.step);
        u64(o.total_steps);
    }

    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class ByteReader {
public:
    explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

    std::string_view raw(std::size_t n) {
        if (n > bytes_.size() - pos_) {
            throw Error("checkpoint: truncated input");
        }
        const auto out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    std::uint8_t u8() { return static_cast<std::uint8_t>(raw(1)[0]); }

    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        }
        return v;
    }

    std::uint64_t u64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        }
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::size_t count(std::size_t element_size) {
        const std::uint64_t n = u64();
        if (n > (bytes_.size() - pos_) / element_size) {
            throw Error("checkpoint: length field exceeds remaining input");
        }
        return static_cast<std::size_t>(n);
    }

    std::string str() { return std::string(raw(count(1))); }

    std::vector<double> f64s() {
        std::vector<double> v(count(8));
        for (double& x : v) {
            x = f64();
        }
        return v;
    }

    Mat mat() {
        const std::uint64_t rows = u64();
        const std::uint64_t cols = u64();
        if (cols != 0 && rows > (bytes_.size() - pos_) / 8 / cols) {
            throw Error("checkpoint: matrix exceeds remaining input");
        }
        Mat m(rows, cols);
        for (double& v : m.values()) {
            v = f64();
        }
        return m;
    }

    EncoderParams encoder() {
        std::vector<std::size_t> widths(count(8));
        for (auto& w : widths) {
            w = u64();
        }
        return EncoderParams::from_values(std::move(widths), f64s());
    }

    OptimizerState optimizer() {
        OptimizerState o;
        o.velocity = f64s();
        o.lr0 = f64();
        o.momentum = f64();
        o.weight_decay = f64();
        const std::uint8_t schedule = u8();
        if (schedule > 1) {
            throw Error("checkpoint: bad learning-rate schedule tag");
        }
        o.schedule = schedule == 0 ? LrSchedule::cosine : LrSchedule::constant;
        o.step = u64();
        o.total_steps = u64();
        return o;
    }

    void expect_magic(std::string_view magic) {
        if (bytes_.size() < magic.size() || raw(magic.size()) != magic) {
            throw Error("checkpoint: bad magic (not an attfc file of this kind)");
        }
        const std::uint32_t version = u32();
        if (version != kFormatVersion) {
            throw Error("checkpoint: unsupported format version " + std::to_string(version));
        }
    }

    void expect_end() const {
        if (pos_ != bytes_.size()) {
            throw Error("checkpoint: trailing bytes");
        }
    }

private:
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
    ByteWriter w;
    w.raw(kCheckpointMagic);
    w.u32(kFormatVersion);
    w.str(to_json(ckpt.config).dump());
    w.u64(ckpt.step);
    w.encoder(ckpt.feature_encoder);
    w.encoder(ckpt.class_encoder);
    w.optimizer(ckpt.optimizer);
    w.u8(ckpt.dcc ? 1 : 0);
    if (ckpt.dcc) {
        w.mat(ckpt.dcc->centers());
        w.u64(ckpt.dcc->labels().size());
        for (Label l : ckpt.dcc->labels()) {
            w.u64(static_cast<std::uint64_t>(l));
        }
        w.u64(ckpt.dcc->cursor());
        w.u64(ckpt.dcc->enqueues());
    }
    w.u8(ckpt.fc_centers ? 1 : 0);
    if (ckpt.fc_centers) {
        if (!ckpt.center_optimizer) {
            throw Error("serialize_checkpoint: fc centers without their optimizer state");
        }
        w.mat(*ckpt.fc_centers);
        w.optimizer(*ckpt.center_optimizer);
    }
    w.str(ckpt.sampler_rng);
    return w.take();
}

Checkpoint deserialize_checkpoint(std::string_view bytes) {
    ByteReader r(bytes);
    r.expect_magic(kCheckpointMagic);
    Checkpoint ckpt;
    const std::string config_text = r.str();
    const auto doc = nlohmann::json::parse(config_text, nullptr, false);
    if (doc.is_discarded()) {
        throw Error("checkpoint: embedded config is not valid JSON");
    }
    ckpt.config = config_from_json(doc);
    ckpt.step = r.u64();
    ckpt.feature_encoder = r.encoder();
    ckpt.class_encoder = r.encoder();
    ckpt.optimizer = r.optimizer();
    if (r.u8() != 0) {
        Mat centers = r.mat();
        std::vector<Label> labels(r.count(8));
        for (Label& l : labels) {
            l = static_cast<Label>(r.u64());
        }
        const std::uint64_t cursor = r.u64();
        const std::uint64_t enqueues = r.u64();
        ckpt.dcc = Dcc::from_parts(std::move(centers), std::move(labels), cursor, enqueues);
    }
    if (r.u8() != 0) {
        ckpt.fc_centers = r.mat();
        ckpt.center_optimizer = r.optimizer();
    }
    ckpt.sampler_rng = r.str();
    r.expect_end();
    return ckpt;
}

std::string serialize_dataset(const SyntheticDataset& dataset) {
    const SyntheticDatasetSpec& spec = dataset.spec();
    ByteWriter w;
    w.raw(kDatasetMagic);
    w.u32(kFormatVersion);
    w.u64(spec.identities);
    w.u64(spec.input_dim);
    w.f64(spec.noise_sigma);
    w.f64(spec.corrupt_sigma);
    w.f64(spec.corrupt_prob);
    w.u64(spec.images_per_identity);
    w.u64(spec.heldout_per_identity);
    w.u64(spec.seed);
    w.mat(dataset.anchors());
    w.mat(dataset.images());
    w.u64(dataset.corrupted_flags().size());
    for (std::uint8_t f : dataset.corrupted_flags()) {
        w.u8(f);
    }
    return w.take();
}

SyntheticDataset deserialize_dataset(std::string_view bytes) {
    ByteReader r(bytes);
    r.expect_magic(kDatasetMagic);
    SyntheticDatasetSpec spec;
    spec.identities = r.u64();
    spec.input_dim = r.u64();
    spec.noise_sigma = r.f64();
    spec.corrupt_sigma = r.f64();
    spec.corrupt_prob = r.f64();
    spec.images_per_identity = r.u64();
    spec.heldout_per_identity = r.u64();
    spec.seed = r.u64();
    Mat anchors = r.mat();
    Mat images = r.mat();
    std::vector<std::uint8_t> flags(r.count(1));
    for (auto& f : flags) {
        f = r.u8();
    }
    r.expect_end();
    return SyntheticDataset(spec, std::move(anchors), std::move(images), std::move(flags));
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open '" + path + "' for writing");
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("failed writing '" + path + "'");
    }
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open '" + path + "'");
    }
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace attfc
