#include "deduce/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

#include "deduce/error.hpp"

namespace deduce {

std::size_t EvalResult::row_total(std::size_t truth) const {
    std::size_t total = 0;
    for (auto v : confusion.at(truth)) {
        total += v;
    }
    return total;
}

EvalResult tabulate(const ClassSet& classes, std::span<const std::size_t> truth,
                    std::span<const std::size_t> predicted) {
    if (truth.size() != predicted.size()) {
        throw DataError("truth and prediction counts differ");
    }
    if (truth.empty()) {
        throw DataError("cannot evaluate zero frames");
    }
    const std::size_t k = classes.size();
    EvalResult r;
    r.classes = classes;
    r.confusion.assign(k, std::vector<std::size_t>(k, 0));
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] >= k || predicted[i] >= k) {
            throw DataError("label outside the class set");
        }
        ++r.confusion[truth[i]][predicted[i]];
        if (truth[i] == predicted[i]) {
            ++correct;
        }
    }
    r.n_frames = truth.size();
    r.micro = static_cast<double>(correct) / static_cast<double>(r.n_frames);
    r.per_class_accuracy.assign(k, std::nullopt);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < k; ++c) {
        const std::size_t total = r.row_total(c);
        if (total == 0) {
            continue;
        }
        const double acc = static_cast<double>(r.confusion[c][c]) / static_cast<double>(total);
        r.per_class_accuracy[c] = acc;
        sum += acc;
        ++present;
    }
    r.average = sum / static_cast<double>(present);
    return r;
}

EvalResult evaluate(std::span<const FrameRecord> frames, ModelKind kind, const ModelBundle& bundle,
                    unsigned jobs) {
    const ClassSet& classes = bundle.output_classes(kind);
    std::vector<std::size_t> truth(frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto& f = frames[i];
        if (!f.truth) {
            throw DataError("frame '" + f.frame_id + "' has no truth label");
        }
        const auto id = classes.find(f.truth->name);
        if (!id) {
            throw DataError("frame '" + f.frame_id + "': truth '" + f.truth->name +
                            "' is not in the model's class set");
        }
        truth[i] = *id;
    }

    std::vector<std::size_t> predicted(frames.size());
    auto run_range = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            predicted[i] = predict(frames[i], kind, bundle).label.id;
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(frames.size(), 1));
    if (workers == 1) {
        run_range(0, frames.size());
    } else {
        std::vector<std::exception_ptr> errors(workers);
        std::vector<std::thread> pool;
        const std::size_t chunk = (frames.size() + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            const std::size_t begin = std::min(frames.size(), w * chunk);
            const std::size_t end = std::min(frames.size(), begin + chunk);
            pool.emplace_back([&, w, begin, end] {
                try {
                    run_range(begin, end);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
        for (const auto& e : errors) {
            if (e) {
                std::rethrow_exception(e);
            }
        }
    }
    return tabulate(classes, truth, predicted);
}

GroupedResult summarize_groups(std::vector<std::pair<std::string, EvalResult>> groups) {
    if (groups.empty()) {
        throw DataError("grouped evaluation needs at least one group");
    }
    GroupedResult g;
    g.classes = groups.front().second.classes;
    const std::size_t k = g.classes.size();
    g.per_scene_average.assign(k, std::nullopt);
    for (std::size_t c = 0; c < k; ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& [key, r] : groups) {
            if (r.classes != g.classes) {
                throw DataError("group '" + key + "' uses a different class set");
            }
            if (r.per_class_accuracy[c]) {
                sum += *r.per_class_accuracy[c];
                ++n;
            }
        }
        if (n > 0) {
            g.per_scene_average[c] = sum / static_cast<double>(n);
        }
    }
    double sum = 0.0;
    for (const auto& [key, r] : groups) {
        sum += r.average;
    }
    g.grand_average = sum / static_cast<double>(groups.size());
    g.groups = std::move(groups);
    return g;
}

GroupedResult grouped_evaluate(std::span<const FrameGroup> groups, ModelKind kind,
                               const ModelBundle& bundle, unsigned jobs) {
    std::vector<std::pair<std::string, EvalResult>> results;
    for (const auto& group : groups) {
        if (group.frames.empty()) {
            throw DataError("group '" + group.key + "' has no frames");
        }
        results.emplace_back(group.key, evaluate(group.frames, kind, bundle, jobs));
    }
    return summarize_groups(std::move(results));
}

ConvergenceComparison compare_convergence(const TrainReport& first, const TrainReport& second,
                                          double target_accuracy) {
    using Faster = ConvergenceComparison::Faster;
    ConvergenceComparison c;
    c.epochs_first = first.epochs_to_reach(target_accuracy);
    c.epochs_second = second.epochs_to_reach(target_accuracy);
    if (c.epochs_first && c.epochs_second) {
        if (*c.epochs_first < *c.epochs_second) {
            c.faster = Faster::first;
            c.margin = *c.epochs_second - *c.epochs_first;
        } else if (*c.epochs_second < *c.epochs_first) {
            c.faster = Faster::second;
            c.margin = *c.epochs_first - *c.epochs_second;
        } else {
            c.faster = Faster::tie;
            c.margin = 0;
        }
    } else if (c.epochs_first) {
        c.faster = Faster::first;
    } else if (c.epochs_second) {
        c.faster = Faster::second;
    }
    return c;
}

std::optional<std::size_t> epochs_to_fraction_of_final(const TrainReport& report, double fraction) {
    return report.epochs_to_reach(fraction * report.final_accuracy());
}

namespace {

std::string percent(const std::optional<double>& v) {
    if (!v) {
        return "-";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * *v);
    return buf;
}

std::string csv_value(const std::optional<double>& v) {
    if (!v) {
        return "";
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
}

} // namespace

std::string ResultTable::render_text() const {
    std::vector<std::vector<std::string>> grid;
    grid.push_back({"Scenes"});
    grid.back().insert(grid.back().end(), columns.begin(), columns.end());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::vector<std::string> line{rows.name(r)};
        for (const auto& v : cells[r]) {
            line.push_back(percent(v));
        }
        grid.push_back(std::move(line));
    }
    std::vector<std::string> avg{"Avg"};
    for (const auto& v : average) {
        avg.push_back(percent(v));
    }
    grid.push_back(std::move(avg));

    std::vector<std::size_t> width(grid.front().size(), 0);
    for (const auto& line : grid) {
        for (std::size_t c = 0; c < line.size(); ++c) {
            width[c] = std::max(width[c], line[c].size());
        }
    }
    std::ostringstream out;
    auto rule = [&] {
        for (std::size_t c = 0; c < width.size(); ++c) {
            out << (c == 0 ? "" : "-+-") << std::string(width[c], '-');
        }
        out << '\n';
    };
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i == grid.size() - 1) {
            rule();
        }
        const auto& line = grid[i];
        for (std::size_t c = 0; c < line.size(); ++c) {
            if (c == 0) {
                out << line[c] << std::string(width[c] - line[c].size(), ' ');
            } else {
                out << " | " << std::string(width[c] - line[c].size(), ' ') << line[c];
            }
        }
        out << '\n';
        if (i == 0) {
            rule();
        }
    }
    return out.str();
}

std::string ResultTable::render_csv() const {
    std::ostringstream out;
    out << "scenes";
    for (const auto& c : columns) {
        out << ',' << c;
    }
    out << '\n';
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out << rows.name(r);
        for (const auto& v : cells[r]) {
            out << ',' << csv_value(v);
        }
        out << '\n';
    }
    out << "avg";
    for (const auto& v : average) {
        out << ',' << csv_value(v);
    }
    out << '\n';
    return out.str();
}

ResultTable make_table(const std::vector<std::pair<std::string, EvalResult>>& columns) {
    if (columns.empty()) {
        throw DataError("a result table needs at least one column");
    }
    ResultTable t;
    t.rows = columns.front().second.classes;
    t.cells.assign(t.rows.size(), {});
    for (const auto& [name, r] : columns) {
        if (r.classes != t.rows) {
            throw DataError("column '" + name + "' uses a different class set");
        }
        t.columns.push_back(name);
        for (std::size_t c = 0; c < t.rows.size(); ++c) {
            t.cells[c].push_back(r.per_class_accuracy[c]);
        }
        t.average.emplace_back(r.average);
    }
    return t;
}

ResultTable make_table(const GroupedResult& grouped) {
    ResultTable t = make_table(grouped.groups);
    t.columns.push_back("Avg");
    for (std::size_t c = 0; c < t.rows.size(); ++c) {
        t.cells[c].push_back(grouped.per_scene_average[c]);
    }
    t.average.emplace_back(grouped.grand_average);
    return t;
}

} // namespace deduce
