#include <patternfit/garment_io.hpp>

#include <fstream>
#include <sstream>

namespace patternfit
{
	using nlohmann::json;

	namespace
	{
		Points2 points2_from_json(const json &arr, const std::string &what)
		{
			if (!arr.is_array())
				throw ValidationError(what + ": expected an array of [x, y] points");
			Points2 p(arr.size(), 2);
			for (size_t i = 0; i < arr.size(); ++i)
			{
				const json &e = arr[i];
				if (!e.is_array() || e.size() != 2)
					throw ValidationError(what + ": point " + std::to_string(i) + " is not [x, y]");
				p(i, 0) = e[0].get<double>();
				p(i, 1) = e[1].get<double>();
			}
			if (!p.allFinite())
				throw ValidationError(what + ": non-finite coordinate");
			return p;
		}

		Points3 points3_from_json(const json &arr, const std::string &what)
		{
			if (!arr.is_array())
				throw ValidationError(what + ": expected an array of [x, y, z] points");
			Points3 p(arr.size(), 3);
			for (size_t i = 0; i < arr.size(); ++i)
			{
				const json &e = arr[i];
				if (!e.is_array() || e.size() != 3)
					throw ValidationError(what + ": point " + std::to_string(i) + " is not [x, y, z]");
				for (int k = 0; k < 3; ++k)
					p(i, k) = e[k].get<double>();
			}
			return p;
		}

		json points_to_json(const auto &p)
		{
			json arr = json::array();
			for (Eigen::Index i = 0; i < p.rows(); ++i)
			{
				json row = json::array();
				for (Eigen::Index k = 0; k < p.cols(); ++k)
					row.push_back(p(i, k));
				arr.push_back(std::move(row));
			}
			return arr;
		}

		SeamSide side_from_json(const json &j)
		{
			SeamSide s;
			s.panel = j.at("panel").get<std::string>();
			s.vertices = j.at("vertices").get<std::vector<int>>();
			return s;
		}

		json side_to_json(const SeamSide &s) { return {{"panel", s.panel}, {"vertices", s.vertices}}; }
	} // namespace

	GarmentSpec garment_from_json(const json &doc, LoadReport *report)
	{
		GarmentSpec spec;
		try
		{
			for (const json &jp : doc.at("panels"))
			{
				Panel p;
				p.id = jp.at("id").get<std::string>();
				p.vertices = points2_from_json(jp.at("vertices"), "panel '" + p.id + "' vertices");
				for (const json &t : jp.at("triangles"))
				{
					if (!t.is_array() || t.size() != 3)
						throw ValidationError("panel '" + p.id + "': triangle entries must be [i, j, k]");
					p.triangles.push_back({t[0].get<int>(), t[1].get<int>(), t[2].get<int>()});
				}
				spec.panels.push_back(std::move(p));
			}
			if (doc.contains("seams"))
				for (const json &js : doc.at("seams"))
					spec.seams.push_back({js.at("id").get<std::string>(), side_from_json(js.at("a")), side_from_json(js.at("b"))});
			if (doc.contains("symmetry_pairs"))
				for (const json &jsym : doc.at("symmetry_pairs"))
				{
					SymmetryPair pair;
					pair.a = jsym.at("a").get<std::string>();
					pair.b = jsym.at("b").get<std::string>();
					if (jsym.contains("correspondence"))
						pair.correspondence = jsym.at("correspondence").get<std::vector<int>>();
					spec.symmetry_pairs.push_back(std::move(pair));
				}
			if (doc.contains("material"))
			{
				const json &m = doc.at("material");
				spec.material.stretch_compliance = m.value("stretch_compliance", spec.material.stretch_compliance);
				spec.material.shear_compliance = m.value("shear_compliance", spec.material.shear_compliance);
				spec.material.bend_compliance = m.value("bend_compliance", spec.material.bend_compliance);
				spec.material.area_density = m.value("area_density", spec.material.area_density);
			}
			if (spec.material.stretch_compliance < 0 || spec.material.shear_compliance < 0)
				throw ValidationError("material compliances must be >= 0");
			if (!(spec.material.area_density > 0))
				throw ValidationError("material area_density must be positive");
			spec.reference_drape3d = points3_from_json(doc.at("reference_drape3d"), "reference_drape3d");
			if (doc.contains("cages"))
				for (const json &jc : doc.at("cages"))
				{
					CageOverride c;
					c.panel = jc.at("panel").get<std::string>();
					c.vertices = points2_from_json(jc.at("vertices"), "cage of panel '" + c.panel + "'");
					spec.cages.push_back(std::move(c));
				}
		}
		catch (const json::exception &e)
		{
			throw ValidationError(std::string("garment spec: ") + e.what());
		}

		auto resampled = resample_seams(spec);
		validate_garment(spec);
		if (report)
			report->resampled = std::move(resampled);
		return spec;
	}

	json garment_to_json(const GarmentSpec &spec)
	{
		json doc;
		doc["panels"] = json::array();
		for (const Panel &p : spec.panels)
		{
			json tris = json::array();
			for (const Tri &t : p.triangles)
				tris.push_back({t[0], t[1], t[2]});
			doc["panels"].push_back({{"id", p.id}, {"vertices", points_to_json(p.vertices)}, {"triangles", tris}});
		}
		doc["seams"] = json::array();
		for (const Seam &s : spec.seams)
			doc["seams"].push_back({{"id", s.id}, {"a", side_to_json(s.side_a)}, {"b", side_to_json(s.side_b)}});
		doc["symmetry_pairs"] = json::array();
		for (const SymmetryPair &s : spec.symmetry_pairs)
			doc["symmetry_pairs"].push_back({{"a", s.a}, {"b", s.b}, {"correspondence", s.correspondence}});
		doc["material"] = {{"stretch_compliance", spec.material.stretch_compliance},
						   {"shear_compliance", spec.material.shear_compliance},
						   {"bend_compliance", spec.material.bend_compliance},
						   {"area_density", spec.material.area_density}};
		doc["reference_drape3d"] = points_to_json(spec.reference_drape3d);
		if (!spec.cages.empty())
		{
			doc["cages"] = json::array();
			for (const CageOverride &c : spec.cages)
				doc["cages"].push_back({{"panel", c.panel}, {"vertices", points_to_json(c.vertices)}});
		}
		return doc;
	}

	std::string read_file(const std::filesystem::path &path)
	{
		std::ifstream in(path, std::ios::binary);
		if (!in)
			throw IoError("cannot open '" + path.string() + "'");
		std::ostringstream ss;
		ss << in.rdbuf();
		return ss.str();
	}

	void write_file_atomic(const std::filesystem::path &path, const std::string &text)
	{
		const std::filesystem::path tmp = path.string() + ".tmp";
		{
			std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
			if (!out)
				throw IoError("cannot write '" + tmp.string() + "'");
			out << text;
			if (!out)
				throw IoError("failed writing '" + tmp.string() + "'");
		}
		std::error_code ec;
		std::filesystem::rename(tmp, path, ec);
		if (ec)
			throw IoError("cannot move '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
	}

	GarmentSpec load_garment_spec(const std::filesystem::path &path, LoadReport *report)
	{
		const std::string text = read_file(path);
		json doc;
		try
		{
			doc = json::parse(text);
		}
		catch (const json::parse_error &e)
		{
			throw ValidationError("'" + path.string() + "': " + e.what());
		}
		try
		{
			return garment_from_json(doc, report);
		}
		catch (const ValidationError &e)
		{
			throw ValidationError("'" + path.string() + "': " + e.what());
		}
	}

	void save_garment_spec(const GarmentSpec &spec, const std::filesystem::path &path)
	{
		write_file_atomic(path, garment_to_json(spec).dump(1) + "\n");
	}
} // namespace patternfit
