#pragma once

#include "koopeq/analysis.hpp"
#include "koopeq/dictionary.hpp"
#include "koopeq/error.hpp"
#include "koopeq/grid.hpp"
#include "koopeq/koopman.hpp"
#include "koopeq/observation.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <bit>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace koopeq {

/// Shortest form is not required; 17 significant digits always round-trip a double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    require(!s.empty(), ErrorKind::io, "empty numeric field");
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    // ERANGE on underflow still yields the correctly rounded subnormal
    const bool range_ok = errno != ERANGE || std::abs(v) < std::numeric_limits<double>::min();
    require(end == s.c_str() + s.size() && range_ok, ErrorKind::io, "malformed number '" + s + "'");
    return v;
}

inline long parse_long(const std::string& s) {
    require(!s.empty(), ErrorKind::io, "empty integer field");
    errno = 0;
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    require(end == s.c_str() + s.size() && errno != ERANGE, ErrorKind::io, "malformed integer '" + s + "'");
    return v;
}

inline std::size_t parse_size(const std::string& s) {
    const long v = parse_long(s);
    require(v >= 0, ErrorKind::io, "negative size '" + s + "'");
    return static_cast<std::size_t>(v);
}

/// Generic on-disk record: a kind tag, key=value header and named matrices.
/// Text: "#koopeq kind=<kind> version=1 k=v ..." then, per matrix,
/// "#matrix name=<name> rows=R cols=C" followed by R whitespace-separated rows.
/// Binary: magic "KOOPEQ01", u64 header length, header text (same key=value
/// lines), then per matrix u64 rows, u64 cols, row-major little-endian f64.
struct Document {
    std::string kind;
    std::map<std::string, std::string> header;
    std::vector<std::pair<std::string, Eigen::MatrixXd>> matrices;

    const std::string& at(const std::string& key) const {
        const auto it = header.find(key);
        require(it != header.end(), ErrorKind::io, kind + " file is missing header field '" + key + "'");
        return it->second;
    }
    double number(const std::string& key) const { return parse_double(at(key)); }
    std::size_t size(const std::string& key) const { return parse_size(at(key)); }

    const Eigen::MatrixXd& matrix(const std::string& name) const {
        for (const auto& [n, m] : matrices)
            if (n == name) return m;
        throw Error(ErrorKind::io, kind + " file is missing matrix '" + name + "'");
    }
};

inline constexpr int kFormatVersion = 1;
inline constexpr char kBinaryMagic[8] = {'K', 'O', 'O', 'P', 'E', 'Q', '0', '1'};

namespace detail {

inline void check_token(const std::string& s, const std::string& what) {
    require(!s.empty(), ErrorKind::invalid_input, what + " must not be empty");
    for (char c : s)
        require(c != ' ' && c != '\t' && c != '\n' && c != '\r' && c != '=', ErrorKind::invalid_input,
                what + " '" + s + "' contains whitespace or '='");
}

inline std::map<std::string, std::string> parse_pairs(std::istringstream& in, const std::string& line) {
    std::map<std::string, std::string> out;
    std::string tok;
    while (in >> tok) {
        const auto eq = tok.find('=');
        require(eq != std::string::npos && eq > 0, ErrorKind::io, "malformed header token '" + tok + "' in: " + line);
        out[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return out;
}

inline std::string header_text(const Document& doc) {
    std::string s = "kind=" + doc.kind + " version=" + std::to_string(kFormatVersion);
    for (const auto& [k, v] : doc.header) {
        check_token(k, "header key");
        check_token(v, "header value");
        s += " " + k + "=" + v;
    }
    return s;
}

inline void read_header(Document& doc, std::map<std::string, std::string> kv) {
    require(kv.count("kind") == 1, ErrorKind::io, "header has no kind");
    require(kv.count("version") == 1 && parse_long(kv["version"]) == kFormatVersion, ErrorKind::io,
            "unsupported file format version");
    doc.kind = kv["kind"];
    kv.erase("kind");
    kv.erase("version");
    doc.header = std::move(kv);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    out.write(b, 8);
}

inline std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    require(in.gcount() == 8, ErrorKind::io, "unexpected end of binary file");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

inline std::ofstream open_out(const std::filesystem::path& path, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io, "cannot open '" + path.string() + "' for writing");
    return out;
}

inline std::ifstream open_in(const std::filesystem::path& path, bool binary) {
    std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open '" + path.string() + "' for reading");
    return in;
}

inline void finish(std::ostream& out, const std::filesystem::path& path) {
    out.flush();
    require(static_cast<bool>(out), ErrorKind::io, "write to '" + path.string() + "' failed");
}

}  // namespace detail

inline void write_text(std::ostream& out, const Document& doc) {
    out << "#koopeq " << detail::header_text(doc) << '\n';
    for (const auto& [name, m] : doc.matrices) {
        detail::check_token(name, "matrix name");
        out << "#matrix name=" << name << " rows=" << m.rows() << " cols=" << m.cols() << '\n';
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                if (c) out << ' ';
                out << format_double(m(r, c));
            }
            out << '\n';
        }
    }
}

inline Document read_text(std::istream& in) {
    Document doc;
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), ErrorKind::io, "empty file");
    {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        require(tag == "#koopeq", ErrorKind::io, "not a koopeq text file (bad first line)");
        detail::read_header(doc, detail::parse_pairs(ls, line));
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        require(tag == "#matrix", ErrorKind::io, "expected a '#matrix' line, got: " + line);
        auto kv = detail::parse_pairs(ls, line);
        require(kv.count("name") && kv.count("rows") && kv.count("cols"), ErrorKind::io, "incomplete matrix line: " + line);
        const auto rows = static_cast<Eigen::Index>(parse_size(kv["rows"]));
        const auto cols = static_cast<Eigen::Index>(parse_size(kv["cols"]));
        Eigen::MatrixXd m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            require(static_cast<bool>(std::getline(in, line)), ErrorKind::io,
                    "matrix '" + kv["name"] + "' truncated at row " + std::to_string(r));
            std::istringstream rs(line);
            std::string tok;
            Eigen::Index c = 0;
            while (rs >> tok) {
                require(c < cols, ErrorKind::io, "too many values in row " + std::to_string(r) + " of '" + kv["name"] + "'");
                m(r, c++) = parse_double(tok);
            }
            require(c == cols, ErrorKind::io, "too few values in row " + std::to_string(r) + " of '" + kv["name"] + "'");
        }
        doc.matrices.emplace_back(kv["name"], std::move(m));
    }
    return doc;
}

inline void write_binary(std::ostream& out, const Document& doc) {
    out.write(kBinaryMagic, sizeof kBinaryMagic);
    std::string head = detail::header_text(doc);
    head += "\nmatrices=" + std::to_string(doc.matrices.size());
    for (const auto& [name, m] : doc.matrices) {
        detail::check_token(name, "matrix name");
        head += " " + name;
    }
    detail::put_u64(out, head.size());
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& [name, m] : doc.matrices) {
        detail::put_u64(out, static_cast<std::uint64_t>(m.rows()));
        detail::put_u64(out, static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) detail::put_u64(out, std::bit_cast<std::uint64_t>(m(r, c)));
    }
}

inline Document read_binary(std::istream& in) {
    char magic[sizeof kBinaryMagic];
    in.read(magic, sizeof magic);
    require(in.gcount() == static_cast<std::streamsize>(sizeof magic) &&
                std::equal(magic, magic + sizeof magic, kBinaryMagic),
            ErrorKind::io, "not a koopeq binary file (bad magic)");
    const std::uint64_t len = detail::get_u64(in);
    require(len < (1u << 24), ErrorKind::io, "implausible binary header length");
    std::string head(len, '\0');
    in.read(head.data(), static_cast<std::streamsize>(len));
    require(static_cast<std::uint64_t>(in.gcount()) == len, ErrorKind::io, "truncated binary header");
    const auto nl = head.find('\n');
    require(nl != std::string::npos, ErrorKind::io, "binary header lacks matrix list");
    Document doc;
    {
        std::istringstream ls(head.substr(0, nl));
        detail::read_header(doc, detail::parse_pairs(ls, head.substr(0, nl)));
    }
    std::istringstream ms(head.substr(nl + 1));
    std::string tok;
    ms >> tok;
    require(tok.rfind("matrices=", 0) == 0, ErrorKind::io, "binary header lacks matrix count");
    const std::size_t count = parse_size(tok.substr(9));
    for (std::size_t i = 0; i < count; ++i) {
        std::string name;
        require(static_cast<bool>(ms >> name), ErrorKind::io, "binary header lists too few matrix names");
        const std::uint64_t rows = detail::get_u64(in);
        const std::uint64_t cols = detail::get_u64(in);
        require(rows < (1ull << 32) && cols < (1ull << 32), ErrorKind::io, "implausible matrix shape");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = std::bit_cast<double>(detail::get_u64(in));
        doc.matrices.emplace_back(name, std::move(m));
    }
    return doc;
}

enum class FileFormat { text, binary };

/// `.bin` selects the binary format, anything else text.
inline FileFormat format_for(const std::filesystem::path& path) {
    return path.extension() == ".bin" ? FileFormat::binary : FileFormat::text;
}

inline void save_document(const Document& doc, const std::filesystem::path& path) {
    const bool bin = format_for(path) == FileFormat::binary;
    auto out = detail::open_out(path, bin);
    bin ? write_binary(out, doc) : write_text(out, doc);
    detail::finish(out, path);
}

inline Document load_document(const std::filesystem::path& path) {
    const bool bin = format_for(path) == FileFormat::binary;
    auto in = detail::open_in(path, bin);
    return bin ? read_binary(in) : read_text(in);
}

// ---------------------------------------------------------------- converters

namespace detail {

inline void put_obs_map(std::map<std::string, std::string>& h, const ObservationMap& m) {
    require(!m.pre_transform, ErrorKind::precondition, "observation maps with a pre-transform cannot be serialized");
    h["q_w"] = std::to_string(m.window_width);
    h["q_d"] = std::to_string(m.delays);
    h["anchor"] = std::to_string(m.anchor);
    h["stride"] = std::to_string(m.stride);
    std::visit(
        [&](const auto& k) {
            using T = std::decay_t<decltype(k)>;
            if constexpr (std::is_same_v<T, DiracKernel>) {
                h["kernel"] = "dirac";
            } else if constexpr (std::is_same_v<T, GaussianKernel>) {
                h["kernel"] = "gaussian";
                h["kernel_alpha"] = format_double(k.alpha);
            } else {
                h["kernel"] = "custom";
                std::string w;
                for (std::size_t i = 0; i < k.weights.size(); ++i) w += (i ? "," : "") + format_double(k.weights[i]);
                h["kernel_weights"] = w.empty() ? "-" : w;
            }
        },
        m.kernel);
}

inline ObservationMap get_obs_map(const Document& d) {
    ObservationMap m;
    m.window_width = d.size("q_w");
    m.delays = d.size("q_d");
    m.anchor = parse_long(d.at("anchor"));
    m.stride = d.size("stride");
    const std::string& k = d.at("kernel");
    if (k == "dirac") {
        m.kernel = DiracKernel{};
    } else if (k == "gaussian") {
        m.kernel = GaussianKernel{d.number("kernel_alpha")};
    } else if (k == "custom") {
        CustomKernel ck;
        const std::string& w = d.at("kernel_weights");
        if (w != "-") {
            std::stringstream ss(w);
            std::string tok;
            while (std::getline(ss, tok, ',')) ck.weights.push_back(parse_double(tok));
        }
        m.kernel = ck;
    } else {
        throw Error(ErrorKind::io, "unknown kernel '" + k + "'");
    }
    return m;
}

inline void expect_kind(const Document& d, const std::string& kind) {
    require(d.kind == kind, ErrorKind::io, "expected a " + kind + " file, got " + d.kind);
}

inline void check_shape(const Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
    require(m.rows() == rows && m.cols() == cols, ErrorKind::io,
            what + " has shape " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ", header implies " +
                std::to_string(rows) + "x" + std::to_string(cols));
}

}  // namespace detail

/// One row per snapshot.
inline Document to_document(const Trajectory& t) {
    Document d;
    d.kind = "trajectory";
    d.header = {{"N", std::to_string(t.grid_size())},
                {"L", format_double(t.domain_length)},
                {"mu", format_double(t.mu)},
                {"dt", format_double(t.dt)},
                {"tau", format_double(t.tau)},
                {"M", std::to_string(t.num_snapshots())},
                {"burn_in_steps", std::to_string(t.burn_in_steps)}};
    d.matrices.emplace_back("snapshots", t.data.transpose());
    return d;
}

inline Trajectory trajectory_from_document(const Document& d) {
    detail::expect_kind(d, "trajectory");
    Trajectory t;
    t.domain_length = d.number("L");
    t.mu = d.number("mu");
    t.dt = d.number("dt");
    t.tau = d.number("tau");
    t.burn_in_steps = parse_long(d.at("burn_in_steps"));
    const auto& s = d.matrix("snapshots");
    detail::check_shape(s, static_cast<Eigen::Index>(d.size("M")), static_cast<Eigen::Index>(d.size("N")), "snapshots");
    t.data = s.transpose();
    return t;
}

/// One row per snapshot pair; control blocks only when present.
inline Document to_document(const EmbeddedDataset& ds) {
    Document d;
    d.kind = "dataset";
    detail::put_obs_map(d.header, ds.source_map);
    d.header["tau"] = format_double(ds.tau);
    d.header["pairs"] = std::to_string(ds.pairs());
    d.header["dim"] = std::to_string(ds.dim());
    d.header["control_dim"] = std::to_string(ds.control.rows());
    std::string anchors;
    for (std::size_t i = 0; i < ds.anchors.size(); ++i) anchors += (i ? "," : "") + std::to_string(ds.anchors[i]);
    d.header["anchors"] = anchors.empty() ? "-" : anchors;
    d.matrices.emplace_back("inputs", ds.inputs.transpose());
    d.matrices.emplace_back("outputs", ds.outputs.transpose());
    if (ds.control.rows() > 0) {
        d.matrices.emplace_back("control", ds.control.transpose());
        d.matrices.emplace_back("control_next", ds.control_next.transpose());
    }
    return d;
}

inline EmbeddedDataset dataset_from_document(const Document& d) {
    detail::expect_kind(d, "dataset");
    EmbeddedDataset ds;
    ds.source_map = detail::get_obs_map(d);
    ds.tau = d.number("tau");
    const auto m = static_cast<Eigen::Index>(d.size("pairs"));
    const auto q = static_cast<Eigen::Index>(d.size("dim"));
    const auto cq = static_cast<Eigen::Index>(d.size("control_dim"));
    detail::check_shape(d.matrix("inputs"), m, q, "inputs");
    detail::check_shape(d.matrix("outputs"), m, q, "outputs");
    ds.inputs = d.matrix("inputs").transpose();
    ds.outputs = d.matrix("outputs").transpose();
    if (cq > 0) {
        detail::check_shape(d.matrix("control"), m, cq, "control");
        detail::check_shape(d.matrix("control_next"), m, cq, "control_next");
        ds.control = d.matrix("control").transpose();
        ds.control_next = d.matrix("control_next").transpose();
    }
    const std::string& a = d.at("anchors");
    if (a != "-") {
        std::stringstream ss(a);
        std::string tok;
        while (std::getline(ss, tok, ',')) ds.anchors.push_back(parse_long(tok));
    }
    return ds;
}

namespace detail {

inline void put_model_common(Document& d, const Dictionary& dict, const ObservationMap& map, double tau, double rcond,
                             std::size_t grid) {
    put_obs_map(d.header, map);
    d.header["l"] = std::to_string(dict.lifted_dim());
    d.header["dict"] = to_string(dict.kind());
    d.header["degree"] = std::to_string(dict.degree());
    d.header["input_dim"] = std::to_string(dict.input_dim());
    d.header["tau"] = format_double(tau);
    d.header["rcond"] = format_double(rcond);
    d.header["N"] = std::to_string(grid);
}

inline Dictionary get_dictionary(const Document& d) {
    const Dictionary dict(dictionary_kind_from_string(d.at("dict")), d.size("input_dim"),
                          static_cast<int>(parse_long(d.at("degree"))));
    require(dict.lifted_dim() == d.size("l"), ErrorKind::io, "lifted dimension in header disagrees with dictionary");
    return dict;
}

}  // namespace detail

/// Row-major K (text) with kind, l, q_w, q_d, dictionary, tau and rcond in the header.
inline Document to_document(const KoopmanModel& model) {
    Document d;
    d.kind = "model";
    d.header["model"] = to_string(model.kind);
    detail::put_model_common(d, model.dictionary, model.obs_map, model.tau, model.rcond, model.grid_size);
    d.matrices.emplace_back("K", model.K);
    return d;
}

inline KoopmanModel model_from_document(const Document& d) {
    detail::expect_kind(d, "model");
    KoopmanModel m;
    m.kind = model_kind_from_string(d.at("model"));
    m.dictionary = detail::get_dictionary(d);
    m.obs_map = detail::get_obs_map(d);
    m.tau = d.number("tau");
    m.rcond = d.number("rcond");
    m.grid_size = d.size("N");
    m.K = d.matrix("K");
    require(m.K.rows() == m.K.cols() && m.K.rows() % static_cast<Eigen::Index>(m.block_dim()) == 0, ErrorKind::io,
            "K shape is inconsistent with the lifted dimension");
    return m;
}

inline Document to_document(const CoupledLocalModel& model) {
    Document d;
    d.kind = "coupled_model";
    d.header["model"] = "dmdc";
    detail::put_model_common(d, model.dictionary, model.obs_map, model.tau, model.rcond, model.grid_size);
    d.matrices.emplace_back("K_hat", model.K_hat);
    d.matrices.emplace_back("B_l", model.B_l);
    d.matrices.emplace_back("B_r", model.B_r);
    return d;
}

inline CoupledLocalModel coupled_model_from_document(const Document& d) {
    detail::expect_kind(d, "coupled_model");
    CoupledLocalModel m;
    m.dictionary = detail::get_dictionary(d);
    m.obs_map = detail::get_obs_map(d);
    m.tau = d.number("tau");
    m.rcond = d.number("rcond");
    m.grid_size = d.size("N");
    m.K_hat = d.matrix("K_hat");
    m.B_l = d.matrix("B_l");
    m.B_r = d.matrix("B_r");
    const auto l = static_cast<Eigen::Index>(m.dictionary.lifted_dim());
    const auto qd = static_cast<Eigen::Index>(m.obs_map.delays);
    detail::check_shape(m.K_hat, l, l, "K_hat");
    detail::check_shape(m.B_l, l, qd, "B_l");
    detail::check_shape(m.B_r, l, qd, "B_r");
    return m;
}

inline void save(const Trajectory& t, const std::filesystem::path& p) { save_document(to_document(t), p); }
inline void save(const EmbeddedDataset& ds, const std::filesystem::path& p) { save_document(to_document(ds), p); }
inline void save(const KoopmanModel& m, const std::filesystem::path& p) { save_document(to_document(m), p); }
inline void save(const CoupledLocalModel& m, const std::filesystem::path& p) { save_document(to_document(m), p); }

inline Trajectory load_trajectory(const std::filesystem::path& p) { return trajectory_from_document(load_document(p)); }
inline EmbeddedDataset load_dataset(const std::filesystem::path& p) { return dataset_from_document(load_document(p)); }
inline KoopmanModel load_model(const std::filesystem::path& p) { return model_from_document(load_document(p)); }
inline CoupledLocalModel load_coupled_model(const std::filesystem::path& p) {
    return coupled_model_from_document(load_document(p));
}

/// Either model type, dispatched on the file's kind tag.
using AnyModel = std::variant<KoopmanModel, CoupledLocalModel>;

inline AnyModel load_any_model(const std::filesystem::path& p) {
    const Document d = load_document(p);
    if (d.kind == "coupled_model") return coupled_model_from_document(d);
    return model_from_document(d);
}

// ---------------------------------------------------------------------- CSV

/// RFC 4180 field: quoted when it contains a comma, quote or line break.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << ',';
            out_ << csv_field(fields[i]);
        }
        out_ << "\r\n";
    }

private:
    std::ostream& out_;
};

/// Parses RFC 4180 text into rows of fields.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false, any = false;
    char c;
    while (in.get(c)) {
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field += '"';
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            row.push_back(std::move(field));
            field.clear();
        } else if (c == '\r' || c == '\n') {
            if (c == '\r' && in.peek() == '\n') in.get();
            row.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row.clear();
            any = false;
        } else {
            field += c;
        }
    }
    require(!quoted, ErrorKind::io, "unterminated quoted CSV field");
    if (any) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_spectrum_csv(std::ostream& out, const Spectrum& s) {
    CsvWriter w(out);
    w.row({"index", "re", "im", "modulus", "argument"});
    for (std::size_t i = 0; i < s.size(); ++i)
        w.row({std::to_string(i), format_double(s[i].real()), format_double(s[i].imag()), format_double(std::abs(s[i])),
               format_double(std::arg(s[i]))});
}

inline void write_error_csv(std::ostream& out, const ErrorReport& r) {
    CsvWriter w(out);
    w.row({"step", "relative_error"});
    for (std::size_t k = 0; k < r.step_errors.size(); ++k) w.row({std::to_string(k), format_double(r.step_errors[k])});
}

inline void write_comparison_csv(std::ostream& out, const SpectrumComparison& c) {
    CsvWriter w(out);
    w.row({"local_index", "local_re", "local_im", "global_index", "global_re", "global_im", "distance"});
    for (const auto& m : c.matches) {
        const auto& l = c.local[m.local_index];
        const auto& g = c.global[m.global_index];
        w.row({std::to_string(m.local_index), format_double(l.real()), format_double(l.imag()),
               std::to_string(m.global_index), format_double(g.real()), format_double(g.imag()),
               format_double(m.distance)});
    }
}

namespace detail {

/// JSON numbers cannot hold NaN or infinity; those become null.
inline nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

template <class T>
inline nlohmann::json json_optional(const std::optional<T>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace detail

inline nlohmann::json sidecar(const ErrorReport& r) {
    nlohmann::json j;
    j["config"] = r.config;
    j["one_step_error"] = detail::json_number(r.one_step_error);
    j["first_exceeding_one"] = detail::json_optional(r.first_exceeding_one);
    j["diverged_at"] = detail::json_optional(r.diverged_at);
    j["steps"] = r.step_errors.size();
    j["max_error"] = detail::json_number(r.max_error());
    j["mean_error"] = detail::json_number(r.mean_error());
    return j;
}

inline nlohmann::json sidecar(const SpectrumComparison& c, const std::map<std::string, std::string>& config = {}) {
    nlohmann::json j;
    j["config"] = config;
    j["k"] = c.matches.size();
    j["leading_hausdorff"] = detail::json_number(c.leading_hausdorff);
    j["global_size"] = c.global.size();
    j["local_size"] = c.local.size();
    return j;
}

namespace detail {

template <class Fn>
inline void write_file(const std::filesystem::path& path, bool binary, Fn&& fn) {
    auto out = open_out(path, binary);
    fn(out);
    finish(out, path);
}

inline void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    write_file(path, false, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

}  // namespace detail

/// Writes <stem>.csv and <stem>.json; returns both paths.
inline std::vector<std::filesystem::path> export_report(const ErrorReport& r, const std::filesystem::path& stem) {
    std::filesystem::path csv = stem, json = stem;
    csv += ".csv";
    json += ".json";
    detail::write_file(csv, true, [&](std::ostream& o) { write_error_csv(o, r); });
    detail::write_json(json, sidecar(r));
    return {csv, json};
}

inline std::vector<std::filesystem::path> export_comparison(const SpectrumComparison& c,
                                                            const std::filesystem::path& stem,
                                                            const std::map<std::string, std::string>& config = {}) {
    std::filesystem::path csv = stem, json = stem;
    csv += ".csv";
    json += ".json";
    detail::write_file(csv, true, [&](std::ostream& o) { write_comparison_csv(o, c); });
    detail::write_json(json, sidecar(c, config));
    return {csv, json};
}

inline void export_spectrum(const Spectrum& s, const std::filesystem::path& path) {
    detail::write_file(path, true, [&](std::ostream& o) { write_spectrum_csv(o, s); });
}

}  // namespace koopeq
