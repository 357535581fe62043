#include <patternfit/mesh_io.hpp>
#include <patternfit/garment_io.hpp>

#include <fmt/format.h>

#include <sstream>

namespace patternfit
{
	ObjMesh read_obj(const std::filesystem::path &path)
	{
		std::istringstream in(read_file(path));
		std::vector<Vec3> verts;
		ObjMesh mesh;
		std::string line;
		int line_no = 0;
		while (std::getline(in, line))
		{
			++line_no;
			std::istringstream ls(line);
			std::string tag;
			if (!(ls >> tag) || tag[0] == '#')
				continue;
			if (tag == "v")
			{
				Vec3 p;
				if (!(ls >> p.x() >> p.y() >> p.z()))
					throw ValidationError(fmt::format("'{}':{}: malformed vertex", path.string(), line_no));
				verts.push_back(p);
			}
			else if (tag == "f")
			{
				std::vector<int> ids;
				std::string tok;
				while (ls >> tok)
				{
					int idx = 0;
					try
					{
						idx = std::stoi(tok.substr(0, tok.find('/')));
					}
					catch (const std::exception &)
					{
						throw ValidationError(fmt::format("'{}':{}: malformed face index '{}'", path.string(), line_no, tok));
					}
					if (idx < 0)
						idx = int(verts.size()) + idx + 1;
					if (idx < 1 || idx > int(verts.size()))
						throw ValidationError(fmt::format("'{}':{}: face index {} out of range", path.string(), line_no, idx));
					ids.push_back(idx - 1);
				}
				if (ids.size() < 3)
					throw ValidationError(fmt::format("'{}':{}: face with fewer than 3 vertices", path.string(), line_no));
				for (size_t k = 1; k + 1 < ids.size(); ++k)
					mesh.triangles.push_back({ids[0], ids[k], ids[k + 1]});
			}
		}
		mesh.vertices.resize(Eigen::Index(verts.size()), 3);
		for (size_t i = 0; i < verts.size(); ++i)
			mesh.vertices.row(Eigen::Index(i)) = verts[i];
		return mesh;
	}

	void write_obj(const std::filesystem::path &path, const Points3 &vertices, const std::vector<Tri> &triangles)
	{
		std::string out;
		out.reserve(size_t(vertices.rows()) * 48 + triangles.size() * 24);
		for (Eigen::Index i = 0; i < vertices.rows(); ++i)
			out += fmt::format("v {:.17g} {:.17g} {:.17g}\n", vertices(i, 0), vertices(i, 1), vertices(i, 2));
		for (const Tri &t : triangles)
			out += fmt::format("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1);
		write_file_atomic(path, out);
	}
} // namespace patternfit
