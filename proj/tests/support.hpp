#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "titlecat/corpus.hpp"

namespace testsupport {

// Self-cleaning temp file with fixed content.
class TempFile {
public:
    explicit TempFile(const std::string& content, const std::string& suffix = ".csv") {
        static std::atomic<unsigned> counter{0};
        path_ = (std::filesystem::temp_directory_path() /
                 ("titlecat_test_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++) + suffix))
                    .string();
        std::ofstream out(path_, std::ios::binary);
        out << content;
    }
    ~TempFile() {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
    }
    const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct Row {
    std::string title;
    std::string category;
    std::string subcategory;
    std::string title2;
};

inline titlecat::corpus::Dataset make_dataset(const std::vector<Row>& rows) {
    titlecat::corpus::Dataset dataset;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        titlecat::corpus::Product p;
        p.id = std::to_string(i + 1);
        p.title_primary = rows[i].title;
        p.title_secondary = rows[i].title2;
        p.category = rows[i].category;
        p.subcategory = rows[i].subcategory;
        p.source = "test";
        dataset.products.push_back(std::move(p));
    }
    dataset.taxonomy = titlecat::corpus::build_taxonomy(dataset);
    return dataset;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testsupport
