import { spawn, ChildProcessWithoutNullStreams } from 'child_process';
import * as path from 'path';
import * as readline from 'readline';

import { Prompt } from './protocol';
import { Segmenter, SegmentJob } from './segmenter';

export interface SamConfig {
  checkpoint: string;
  modelType: string;
  device: string;
  python: string;
}

interface Pending {
  resolve: (maskB64: string) => void;
  reject: (err: Error) => void;
}

/**
 * Runs SAM in a python worker subprocess speaking JSON lines.
 *
 * The worker loads the checkpoint once and answers one request per line;
 * model access is therefore serialized in the worker while the HTTP layer
 * stays async. When SAM proposes several candidate masks the worker keeps
 * the one with the highest predicted quality.
 */
export class SamSubprocessSegmenter implements Segmenter {
  readonly name = 'sam';

  private proc: ChildProcessWithoutNullStreams | null = null;
  private ready: Promise<void> | null = null;
  private pending = new Map<number, Pending>();
  private nextId = 1;

  constructor(private readonly config: SamConfig) {}

  private start(): Promise<void> {
    if (this.ready) return this.ready;
    const workerPath = path.join(__dirname, '..', 'python', 'sam_worker.py');
    const proc = spawn(this.config.python, [
      workerPath,
      '--checkpoint', this.config.checkpoint,
      '--model-type', this.config.modelType,
      '--device', this.config.device,
    ]);
    this.proc = proc;
    proc.stderr.on('data', (chunk) => process.stderr.write(`[sam_worker] ${chunk}`));
    const lines = readline.createInterface({ input: proc.stdout });
    this.ready = new Promise<void>((resolveReady, rejectReady) => {
      let sawReady = false;
      lines.on('line', (line) => {
        let msg: any;
        try {
          msg = JSON.parse(line);
        } catch {
          return;
        }
        if (!sawReady && msg.ready) {
          sawReady = true;
          resolveReady();
          return;
        }
        const entry = this.pending.get(msg.id);
        if (!entry) return;
        this.pending.delete(msg.id);
        if (msg.error) entry.reject(new Error(msg.error));
        else entry.resolve(msg.mask_png_base64);
      });
      proc.on('exit', (code) => {
        const err = new Error(`sam worker exited with code ${code}`);
        if (!sawReady) rejectReady(err);
        for (const entry of this.pending.values()) entry.reject(err);
        this.pending.clear();
        this.proc = null;
        this.ready = null;
      });
      proc.on('error', (err) => {
        if (!sawReady) rejectReady(err);
      });
    });
    return this.ready;
  }

  private async segmentRaw(imagePngBase64: string, prompt: Prompt): Promise<string> {
    await this.start();
    const id = this.nextId++;
    const payload = JSON.stringify({ id, image_png_base64: imagePngBase64, prompt });
    return new Promise<string>((resolve, reject) => {
      this.pending.set(id, { resolve, reject });
      this.proc!.stdin.write(payload + '\n', (err) => {
        if (err) {
          this.pending.delete(id);
          reject(err);
        }
      });
    });
  }

  /** The worker consumes the original PNG, not the luma reduction. */
  async segment(job: SegmentJob): Promise<string> {
    return this.segmentRaw(job.imagePngBase64, job.prompt);
  }

  stop(): void {
    this.proc?.kill();
  }
}
