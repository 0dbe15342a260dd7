#include "graybox/datagen.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "graybox/errors.hpp"
#include "graybox/parallel.hpp"
#include "graybox/text.hpp"

namespace graybox {

void GenConfig::validate() const {
    if (x0_variance < 0 || s0_variance < 0 || v0_variance < 0 || sin0_variance < 0 ||
        sin_step_variance < 0) {
        throw config_error("variances must be >= 0");
    }
    if (!(v0_floor > 0.0)) throw config_error("v0 floor must be positive");
    if (n_train < 1 || n_validation < 1 || n_test < 1) {
        throw config_error("split sizes must be >= 1");
    }
    if (!(max_reject_fraction >= 0.0)) throw config_error("reject fraction must be >= 0");
}

State draw_initial_state_raw(Rng& rng, const GenConfig& gen) {
    State st;
    st.x = rng.normal(0.0, std::sqrt(gen.x0_variance));
    st.s = rng.normal(0.0, std::sqrt(gen.s0_variance));
    st.v = rng.normal(gen.v0_mean, std::sqrt(gen.v0_variance));
    return st;
}

State sample_initial_state(Rng& rng, const GenConfig& gen) {
    State st = draw_initial_state_raw(rng, gen);
    st.x = std::abs(st.x);
    st.s = std::abs(st.s);
    st.v = std::max(st.v, gen.v0_floor);
    return st;
}

std::vector<double> sample_sin_series(Rng& rng, int n_steps, const GenConfig& gen) {
    if (n_steps < 1) throw config_error("series length must be >= 1");
    std::vector<double> series(n_steps);
    double value = rng.normal(gen.sin0_mean, std::sqrt(gen.sin0_variance));
    if (gen.reflect_sin) value = std::abs(value);
    series[0] = value;
    const double step_sd = std::sqrt(gen.sin_step_variance);
    for (int t = 1; t < n_steps; ++t) {
        value += rng.normal(0.0, step_sd);
        if (gen.reflect_sin) value = std::abs(value);
        series[t] = value;
    }
    return series;
}

Sample draw_sample(Rng& rng, int n_steps, const GenConfig& gen) {
    Sample s;
    s.x0 = sample_initial_state(rng, gen);
    s.s_in = sample_sin_series(rng, n_steps, gen);
    return s;
}

namespace {

constexpr int max_attempts_per_sample = 64;

SampleWithTruth generate_one(std::uint64_t seed, int split_id, int index,
                             const BioreactorConfig& cfg, const GenConfig& gen,
                             const MuFn& truth_mu, long& rejections) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(split_id),
                               static_cast<std::uint64_t>(index)}));
    for (int attempt = 0; attempt < max_attempts_per_sample; ++attempt) {
        SampleWithTruth item;
        item.sample = draw_sample(rng, cfg.n_steps, gen);
        try {
            item.truth = integrate(item.sample.x0, item.sample.s_in, truth_mu, cfg);
            return item;
        } catch (const blowup_error&) {
            ++rejections;
        }
    }
    throw config_error("sample redraw limit exceeded; dynamics config is unstable");
}

}  // namespace

Corpus generate_corpus(std::uint64_t seed, const BioreactorConfig& cfg, const GenConfig& gen) {
    cfg.validate();
    gen.validate();

    Corpus corpus;
    corpus.seed = seed;
    corpus.cfg = cfg;
    corpus.gen = gen;

    const MuFn truth_mu = haldane_mu_fn(cfg);
    std::atomic<long> rejections{0};

    auto fill_split = [&](int split_id, int count, std::vector<SampleWithTruth>& out) {
        out.resize(count);
        parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
            long local_rejections = 0;
            out[i] = generate_one(seed, split_id, static_cast<int>(i), cfg, gen, truth_mu,
                                  local_rejections);
            rejections.fetch_add(local_rejections, std::memory_order_relaxed);
        });
    };

    fill_split(0, gen.n_train, corpus.train);
    fill_split(1, gen.n_validation, corpus.validation);
    fill_split(2, gen.n_test, corpus.test);

    corpus.rejected_samples = rejections.load();
    const long total = gen.n_train + gen.n_validation + gen.n_test;
    if (static_cast<double>(corpus.rejected_samples) >
        gen.max_reject_fraction * static_cast<double>(total)) {
        throw config_error("rejection rate above " + g17(gen.max_reject_fraction) +
                           ": dynamics config is unstable (" +
                           std::to_string(corpus.rejected_samples) + " redraws for " +
                           std::to_string(total) + " samples)");
    }
    return corpus;
}

BioreactorConfig coarsen_config(const BioreactorConfig& cfg, int factor) {
    if (factor < 1) throw contract_error("coarsen factor must be >= 1");
    if (cfg.n_steps % factor != 0) {
        throw contract_error("coarsen factor must divide n_steps");
    }
    BioreactorConfig out = cfg;
    out.dt = cfg.dt * factor;
    out.n_steps = cfg.n_steps / factor;
    return out;
}

SampleWithTruth coarsen(const SampleWithTruth& item, int factor) {
    const int n = item.truth.n_steps();
    if (factor < 1) throw contract_error("coarsen factor must be >= 1");
    if (n % factor != 0) throw contract_error("coarsen factor must divide n_steps");
    if (item.sample.s_in.size() != static_cast<std::size_t>(n)) {
        throw contract_error("sample and truth horizons differ");
    }

    const int m = n / factor;
    SampleWithTruth out;
    out.sample.x0 = item.sample.x0;
    out.sample.s_in.resize(m);
    out.truth.s_in.resize(m);
    out.truth.states.resize(m + 1);
    for (int t = 0; t < m; ++t) {
        out.sample.s_in[t] = item.sample.s_in[static_cast<std::size_t>(t) * factor];
        out.truth.s_in[t] = out.sample.s_in[t];
        out.truth.states[t] = item.truth.states[static_cast<std::size_t>(t) * factor];
    }
    out.truth.states[m] = item.truth.states[n];
    return out;
}

std::vector<SampleWithTruth> coarsen_split(const std::vector<SampleWithTruth>& split, int factor) {
    std::vector<SampleWithTruth> out;
    out.reserve(split.size());
    for (const SampleWithTruth& item : split) out.push_back(coarsen(item, factor));
    return out;
}

namespace {

constexpr char corpus_magic[8] = {'G', 'B', 'O', 'X', 'C', 'O', 'R', 'P'};
constexpr std::uint32_t corpus_version = 1;

template <typename T>
void write_le(std::ostream& out, T value) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        }
    }
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T read_le(std::istream& in) {
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        for (std::size_t i = 0; i < sizeof(T) / 2; ++i) {
            std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
        }
    }
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
}

std::string header_text(const Corpus& c) {
    std::ostringstream h;
    h << "byte_order=little\n";
    h << "seed=" << c.seed << "\n";
    h << "n_train=" << c.gen.n_train << "\n";
    h << "n_validation=" << c.gen.n_validation << "\n";
    h << "n_test=" << c.gen.n_test << "\n";
    h << "n_steps=" << c.cfg.n_steps << "\n";
    h << "dt=" << g17(c.cfg.dt) << "\n";
    h << "k1=" << g17(c.cfg.k1) << "\n";
    h << "feed_rate=" << g17(c.cfg.feed_rate) << "\n";
    h << "mu_star=" << g17(c.cfg.mu_star) << "\n";
    h << "k_m=" << g17(c.cfg.k_m) << "\n";
    h << "k_i=" << g17(c.cfg.k_i) << "\n";
    h << "state_bound=" << g17(c.cfg.state_bound) << "\n";
    h << "x0_variance=" << g17(c.gen.x0_variance) << "\n";
    h << "s0_variance=" << g17(c.gen.s0_variance) << "\n";
    h << "v0_variance=" << g17(c.gen.v0_variance) << "\n";
    h << "v0_mean=" << g17(c.gen.v0_mean) << "\n";
    h << "v0_floor=" << g17(c.gen.v0_floor) << "\n";
    h << "sin0_mean=" << g17(c.gen.sin0_mean) << "\n";
    h << "sin0_variance=" << g17(c.gen.sin0_variance) << "\n";
    h << "sin_step_variance=" << g17(c.gen.sin_step_variance) << "\n";
    h << "reflect_sin=" << (c.gen.reflect_sin ? 1 : 0) << "\n";
    h << "max_reject_fraction=" << g17(c.gen.max_reject_fraction) << "\n";
    h << "rejected_samples=" << c.rejected_samples << "\n";
    return h.str();
}

std::map<std::string, std::string> parse_header(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

double header_double(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw config_error("corpus header missing key: " + key);
    return std::strtod(it->second.c_str(), nullptr);
}

long header_long(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw config_error("corpus header missing key: " + key);
    return std::strtol(it->second.c_str(), nullptr, 10);
}

void write_split(std::ostream& out, const std::vector<SampleWithTruth>& split) {
    for (const SampleWithTruth& item : split) {
        write_le(out, item.sample.x0.x);
        write_le(out, item.sample.x0.s);
        write_le(out, item.sample.x0.v);
        for (double v : item.sample.s_in) write_le(out, v);
        for (const State& st : item.truth.states) write_le(out, st.x);
        for (const State& st : item.truth.states) write_le(out, st.s);
        for (const State& st : item.truth.states) write_le(out, st.v);
    }
}

void read_split(std::istream& in, std::vector<SampleWithTruth>& split, int count, int n_steps) {
    split.resize(count);
    for (SampleWithTruth& item : split) {
        item.sample.x0.x = read_le<double>(in);
        item.sample.x0.s = read_le<double>(in);
        item.sample.x0.v = read_le<double>(in);
        item.sample.s_in.resize(n_steps);
        for (double& v : item.sample.s_in) v = read_le<double>(in);
        item.truth.s_in = item.sample.s_in;
        item.truth.states.resize(n_steps + 1);
        for (State& st : item.truth.states) st.x = read_le<double>(in);
        for (State& st : item.truth.states) st.s = read_le<double>(in);
        for (State& st : item.truth.states) st.v = read_le<double>(in);
    }
}

}  // namespace

void save_corpus(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw config_error("cannot open corpus for writing: " + path);
    const std::string header = header_text(corpus);
    out.write(corpus_magic, sizeof(corpus_magic));
    write_le<std::uint32_t>(out, corpus_version);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    write_split(out, corpus.train);
    write_split(out, corpus.validation);
    write_split(out, corpus.test);
    if (!out) throw config_error("corpus write failed: " + path);
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open corpus: " + path);
    char got[8];
    in.read(got, sizeof(got));
    if (!in || std::memcmp(got, corpus_magic, sizeof(corpus_magic)) != 0) {
        throw config_error("not a corpus file: " + path);
    }
    const auto version = read_le<std::uint32_t>(in);
    if (version != corpus_version) throw config_error("unsupported corpus version in " + path);
    const auto header_len = read_le<std::uint32_t>(in);
    std::string header(header_len, '\0');
    in.read(header.data(), header_len);
    if (!in) throw config_error("corpus header truncated: " + path);
    const auto kv = parse_header(header);

    Corpus c;
    c.seed = static_cast<std::uint64_t>(header_long(kv, "seed"));
    c.gen.n_train = static_cast<int>(header_long(kv, "n_train"));
    c.gen.n_validation = static_cast<int>(header_long(kv, "n_validation"));
    c.gen.n_test = static_cast<int>(header_long(kv, "n_test"));
    c.cfg.n_steps = static_cast<int>(header_long(kv, "n_steps"));
    c.cfg.dt = header_double(kv, "dt");
    c.cfg.k1 = header_double(kv, "k1");
    c.cfg.feed_rate = header_double(kv, "feed_rate");
    c.cfg.mu_star = header_double(kv, "mu_star");
    c.cfg.k_m = header_double(kv, "k_m");
    c.cfg.k_i = header_double(kv, "k_i");
    c.cfg.state_bound = header_double(kv, "state_bound");
    c.gen.x0_variance = header_double(kv, "x0_variance");
    c.gen.s0_variance = header_double(kv, "s0_variance");
    c.gen.v0_variance = header_double(kv, "v0_variance");
    c.gen.v0_mean = header_double(kv, "v0_mean");
    c.gen.v0_floor = header_double(kv, "v0_floor");
    c.gen.sin0_mean = header_double(kv, "sin0_mean");
    c.gen.sin0_variance = header_double(kv, "sin0_variance");
    c.gen.sin_step_variance = header_double(kv, "sin_step_variance");
    c.gen.reflect_sin = header_long(kv, "reflect_sin") != 0;
    c.gen.max_reject_fraction = header_double(kv, "max_reject_fraction");
    c.rejected_samples = header_long(kv, "rejected_samples");

    read_split(in, c.train, c.gen.n_train, c.cfg.n_steps);
    read_split(in, c.validation, c.gen.n_validation, c.cfg.n_steps);
    read_split(in, c.test, c.gen.n_test, c.cfg.n_steps);
    if (!in) throw config_error("corpus payload truncated: " + path);
    return c;
}

SplitMaxima split_maxima(const std::vector<SampleWithTruth>& split) {
    if (split.empty()) throw contract_error("empty split");
    const std::size_t len = split.front().truth.states.size();
    SplitMaxima m;
    m.max_x.assign(len, -std::numeric_limits<double>::infinity());
    m.max_s.assign(len, -std::numeric_limits<double>::infinity());
    for (const SampleWithTruth& item : split) {
        if (item.truth.states.size() != len) throw contract_error("ragged split");
        for (std::size_t t = 0; t < len; ++t) {
            m.max_x[t] = std::max(m.max_x[t], item.truth.states[t].x);
            m.max_s[t] = std::max(m.max_s[t], item.truth.states[t].s);
        }
    }
    m.running_max_x.resize(len);
    m.running_max_s.resize(len);
    double rx = -std::numeric_limits<double>::infinity();
    double rs = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < len; ++t) {
        rx = std::max(rx, m.max_x[t]);
        rs = std::max(rs, m.max_s[t]);
        m.running_max_x[t] = rx;
        m.running_max_s[t] = rs;
    }
    return m;
}

void write_stats_csv(std::ostream& out, const SplitMaxima& maxima) {
    out << "step,max_X,max_S,running_max_X,running_max_S\n";
    for (std::size_t t = 0; t < maxima.max_x.size(); ++t) {
        out << t << ',' << g17(maxima.max_x[t]) << ',' << g17(maxima.max_s[t]) << ','
            << g17(maxima.running_max_x[t]) << ',' << g17(maxima.running_max_s[t]) << '\n';
    }
}

}  // namespace graybox
