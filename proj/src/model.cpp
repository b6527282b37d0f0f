#include "watershed/model.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "watershed/csv.hpp"

namespace watershed {

namespace {

constexpr std::string_view kMagic = "# watershed-model 1";

void write_rows(std::ostream& out, std::string_view section, const Matrix& m) {
    out << '[' << section << "]\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << format_exact(m(r, c));
        }
        out << '\n';
    }
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows, std::string_view section) {
    if (rows.empty()) return Matrix();
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.front().size())
            throw FormatError("model: ragged rows in section [" + std::string(section) + "]");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
}

}  // namespace

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::watershed: return "watershed";
        case LossKind::nca: return "nca";
        case LossKind::linear: return "linear";
    }
    return "watershed";
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "watershed") return LossKind::watershed;
    if (name == "nca") return LossKind::nca;
    if (name == "linear") return LossKind::linear;
    throw UsageError("unknown loss '" + std::string(name) + "' (expected watershed, nca or linear)");
}

Matrix LinearEmbedding::embed(const Matrix& x) const {
    if (x.cols() != weights.rows())
        throw UsageError("embedding expects " + std::to_string(weights.rows()) + " input features, got " +
                         std::to_string(x.cols()));
    return x * weights;
}

LinearEmbedding LinearEmbedding::identity(std::size_t dim) {
    return LinearEmbedding{Matrix::Identity(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim))};
}

Standardizer Standardizer::fit(const Matrix& x) {
    if (x.rows() == 0) throw UsageError("cannot standardise an empty matrix");
    Standardizer s;
    s.mean = x.colwise().mean();
    s.scale.resize(x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double var = (x.col(c).array() - s.mean(c)).square().mean();
        s.scale(c) = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return s;
}

Standardizer Standardizer::identity(std::size_t dim) {
    return Standardizer{RowVector::Zero(static_cast<Eigen::Index>(dim)),
                        RowVector::Ones(static_cast<Eigen::Index>(dim))};
}

Matrix Standardizer::apply(const Matrix& x) const {
    if (x.cols() != mean.size()) throw UsageError("standardiser: feature count mismatch");
    Matrix out = x;
    out.rowwise() -= mean;
    out.array().rowwise() /= scale.array();
    return out;
}

Matrix Model::transform(const Matrix& raw) const { return embedding.embed(standardizer.apply(raw)); }

Model Model::identity(std::size_t dim, std::size_t num_classes) {
    Model m;
    m.kind = LossKind::watershed;
    m.num_classes = num_classes;
    m.standardizer = Standardizer::identity(dim);
    m.embedding = LinearEmbedding::identity(dim);
    m.metadata.emplace_back("source", "identity");
    return m;
}

void write_model(std::ostream& out, const Model& model) {
    out << kMagic << '\n';
    for (const auto& [key, value] : model.metadata) out << "# " << key << '=' << value << '\n';
    out << "kind," << to_string(model.kind) << '\n';
    out << "num_classes," << model.num_classes << '\n';
    write_rows(out, "mean", model.standardizer.mean);
    write_rows(out, "scale", model.standardizer.scale);
    write_rows(out, "embedding", model.embedding.weights);
    if (model.head) {
        write_rows(out, "head", model.head->weights);
        write_rows(out, "bias", model.head->bias);
    }
}

Model read_model(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != kMagic) throw FormatError("model: missing '# watershed-model 1' header");

    Model model;
    std::map<std::string, std::vector<std::vector<double>>> sections;
    std::string current;
    bool have_kind = false;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view text = trim(line);
        if (text.empty()) continue;
        if (text.front() == '#') {
            const std::string_view body = trim(text.substr(1));
            const auto eq = body.find('=');
            if (eq != std::string_view::npos)
                model.metadata.emplace_back(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
            continue;
        }
        if (text.front() == '[') {
            if (text.back() != ']') throw FormatError("model: bad section header at line " + std::to_string(line_no));
            current = std::string(text.substr(1, text.size() - 2));
            sections[current];
            continue;
        }
        const auto fields = split_csv_line(text);
        if (current.empty()) {
            if (fields.size() != 2) throw FormatError("model: bad field at line " + std::to_string(line_no));
            if (fields[0] == "kind") {
                model.kind = parse_loss_kind(fields[1]);
                have_kind = true;
            } else if (fields[0] == "num_classes") {
                long long k = 0;
                if (!parse_int(fields[1], k) || k < 0) throw FormatError("model: bad num_classes");
                model.num_classes = static_cast<std::size_t>(k);
            } else {
                throw FormatError("model: unknown field '" + fields[0] + "' at line " + std::to_string(line_no));
            }
            continue;
        }
        std::vector<double> row;
        for (const auto& f : fields) {
            double v = 0.0;
            if (!parse_double(f, v)) throw FormatError("model: non-numeric value at line " + std::to_string(line_no));
            row.push_back(v);
        }
        sections[current].push_back(std::move(row));
    }
    if (!have_kind) throw FormatError("model: missing kind");
    for (const char* required : {"mean", "scale", "embedding"})
        if (!sections.count(required)) throw FormatError(std::string("model: missing section [") + required + "]");

    const Matrix mean = to_matrix(sections["mean"], "mean");
    const Matrix scale = to_matrix(sections["scale"], "scale");
    model.embedding.weights = to_matrix(sections["embedding"], "embedding");
    if (mean.rows() != 1 || scale.rows() != 1 || mean.cols() != model.embedding.weights.rows() ||
        scale.cols() != mean.cols())
        throw FormatError("model: standardiser does not match the embedding");
    model.standardizer.mean = mean.row(0);
    model.standardizer.scale = scale.row(0);

    if (sections.count("head")) {
        LinearHead head;
        head.weights = to_matrix(sections["head"], "head");
        const Matrix bias = to_matrix(sections["bias"], "bias");
        if (head.weights.rows() != model.embedding.weights.cols() || bias.rows() != 1 ||
            bias.cols() != head.weights.cols())
            throw FormatError("model: head does not match the embedding");
        head.bias = bias.row(0);
        model.head = std::move(head);
    }
    if (model.kind == LossKind::linear && !model.head) throw FormatError("model: linear model without a head");
    return model;
}

void save_model(const std::filesystem::path& path, const Model& model) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    write_model(out, model);
    if (!out) throw std::runtime_error("failed writing " + path.string());
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_model(in);
}

}  // namespace watershed
