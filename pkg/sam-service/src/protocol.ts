import { z } from 'zod';

export const PointPromptSchema = z.object({
  type: z.literal('point'),
  x: z.number().int(),
  y: z.number().int(),
});

export const BoxPromptSchema = z.object({
  type: z.literal('box'),
  x_min: z.number().int(),
  y_min: z.number().int(),
  x_max: z.number().int(),
  y_max: z.number().int(),
});

export const SegmentRequestSchema = z.object({
  image_png_base64: z.string().min(1),
  prompt: z.discriminatedUnion('type', [PointPromptSchema, BoxPromptSchema]),
});

export type PointPrompt = z.infer<typeof PointPromptSchema>;
export type BoxPrompt = z.infer<typeof BoxPromptSchema>;
export type Prompt = PointPrompt | BoxPrompt;
export type SegmentRequest = z.infer<typeof SegmentRequestSchema>;

export interface SegmentResponse {
  mask_png_base64: string;
}
