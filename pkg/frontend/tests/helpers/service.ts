import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

/** Deterministic [0, 1) generator so the seeded corpus never drifts. */
function mulberry32(seed: number): () => number {
  let state = seed | 0;
  return () => {
    state = (state + 0x6d2b79f5) | 0;
    let t = Math.imul(state ^ (state >>> 15), 1 | state);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function unitVector(rng: () => number, dim: number): number[] {
  const raw = Array.from({ length: dim }, () => rng() * 2 - 1);
  const norm = Math.hypot(...raw);
  return raw.map((x) => x / norm);
}

export interface SeededService {
  baseUrl: string;
  dir: string;
  decisionsPath: string;
  stop(): void;
}

/**
 * Write a small catalog with ten review scenarios and start the real
 * review service on it: ten sending courses at "alpha", eight
 * transferable courses at "beta", one expansion row per sending course.
 * Every scenario therefore offers exactly seven ranked candidates.
 */
export async function startSeededService(): Promise<SeededService> {
  const dir = mkdtempSync(join(tmpdir(), "review-ui-e2e-"));
  const dim = 8;
  const rng = mulberry32(20240101);

  const institutions = ["id,name,segment", "alpha,Alpha College,2", "beta,Beta University,4"];
  const courses = ["id,institution_id,title,description,cip2,level,transferable"];
  const embeddings: string[] = [];
  const expansions = ["source_course_id,target_course_id,cosine"];

  const addCourse = (courseId: string, institution: string, title: string) => {
    courses.push(
      `${courseId},${institution},${title},Weekly lectures and problem sets for ${title}.,27,L,1`,
    );
    embeddings.push(JSON.stringify({ course_id: courseId, vector: unitVector(rng, dim) }));
  };

  for (let i = 1; i <= 10; i++) {
    const courseId = `alpha:C${String(i).padStart(2, "0")}`;
    addCourse(courseId, "alpha", `Sending course ${i}`);
    expansions.push(`${courseId},beta:B01,0.9`);
  }
  for (let i = 1; i <= 8; i++) {
    addCourse(`beta:B${String(i).padStart(2, "0")}`, "beta", `Receiving course ${i}`);
  }

  writeFileSync(join(dir, "institutions.csv"), institutions.join("\n") + "\n");
  writeFileSync(join(dir, "courses.csv"), courses.join("\n") + "\n");
  writeFileSync(join(dir, "articulations.csv"), "source_course_id,target_course_id\n");
  writeFileSync(join(dir, "embeddings.jsonl"), embeddings.join("\n") + "\n");
  writeFileSync(join(dir, "expansions.csv"), expansions.join("\n") + "\n");

  const decisionsPath = join(dir, "decisions.ndjson");
  const child: ChildProcess = spawn(
    "coursealign",
    [
      "serve",
      "--institutions", join(dir, "institutions.csv"),
      "--courses", join(dir, "courses.csv"),
      "--articulations", join(dir, "articulations.csv"),
      "--embeddings", join(dir, "embeddings.jsonl"),
      "--expansions", join(dir, "expansions.csv"),
      "--decisions", decisionsPath,
      "--port", "0",
    ],
    {
      cwd: dir,
      env: { ...process.env, OPENBLAS_NUM_THREADS: "1" },
      stdio: ["ignore", "pipe", "pipe"],
    },
  );

  let stderrText = "";
  child.stderr?.on("data", (chunk: Buffer) => {
    stderrText += chunk.toString();
  });

  const port = await new Promise<number>((resolve, reject) => {
    let buffered = "";
    const timer = setTimeout(
      () => reject(new Error(`service did not announce a port; stderr: ${stderrText}`)),
      30_000,
    );
    child.stdout?.on("data", (chunk: Buffer) => {
      buffered += chunk.toString();
      const newline = buffered.indexOf("\n");
      if (newline >= 0) {
        clearTimeout(timer);
        try {
          resolve(JSON.parse(buffered.slice(0, newline)).port as number);
        } catch (err) {
          reject(err);
        }
      }
    });
    child.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`service exited with ${code}; stderr: ${stderrText}`));
    });
  });

  return {
    baseUrl: `http://127.0.0.1:${port}`,
    dir,
    decisionsPath,
    stop() {
      child.kill("SIGKILL");
      rmSync(dir, { recursive: true, force: true });
    },
  };
}
