#pragma once

#include <string>

#include "doctest.h"
#include "fibredist/common.hpp"

#define CHECK_THROWS_AS_CODE(expr, expected)                    \
    do {                                                        \
        bool thrown_ = false;                                   \
        try {                                                   \
            (void)(expr);                                       \
        } catch (const ::fibredist::Error& e_) {                \
            thrown_ = true;                                     \
            CHECK(e_.code() == (expected));                     \
        }                                                       \
        CHECK_MESSAGE(thrown_, "expected an Error from " #expr); \
    } while (0)

namespace test {

inline std::string csv_header() {
    return "doi,polymer,solvent1,solvent2,solvent3,solvent1_ratio,solvent2_ratio,solvent3_ratio,concentration,"
           "needle_diameter,collector_type,rotation_speed,voltage,flow_rate,distance,temperature,humidity,"
           "fibre_diameter\n";
}

inline std::string csv_row(const std::string& doi, const std::string& polymer, const std::string& c,
                           const std::string& g, const std::string& rpm, const std::string& v, const std::string& q,
                           const std::string& d, const std::string& target) {
    return doi + "," + polymer + ",WATER,NONE,NONE,100,0,0," + c + "," + g + ",flat," + rpm + "," + v + "," + q + "," +
           d + ",,," + target + "\n";
}

}  // namespace test
