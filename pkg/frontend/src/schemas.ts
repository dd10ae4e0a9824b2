/**
 * Validators for the lvglass JSON reports this package consumes.
 *
 * Mirrors the producer's published schemas closely enough to fail fast
 * with the offending field name; extra fields are tolerated where the
 * producer's schema allows additions.
 */

import { z } from "zod";

const finite = z.number().finite();

export const freeEnergySchema = z
  .object({
    schema: z.literal("lvglass/free-energy/v1"),
    mode: z.enum(["disorder-average", "single-draw"]),
    n: z.number().int().positive(),
    kappa: z.number().min(0),
    alpha: z.number(),
    beta: z.number().positive(),
    phi: z.number().positive(),
    value: finite,
    std_error: z.number().positive(),
    truncation_frequency: z.number().min(0).max(1),
    seeds: z.array(z.number().int()),
    schedule: z.array(z.number()),
  })
  .passthrough();

export type FreeEnergyReport = z.infer<typeof freeEnergySchema>;

export const sdeSummarySchema = z
  .object({
    schema: z.literal("lvglass/sde-summary/v1"),
    params: z
      .object({
        n: z.number().int().positive(),
        kappa: z.number().min(0),
        alpha: z.number(),
        phi: z.number().min(0),
        temperature: z.number().positive(),
        dt: z.number().positive(),
        t_end: z.number().positive(),
        seed: z.number().int(),
        matrix_seed: z.number().int(),
      })
      .passthrough(),
    observables: z.array(z.string()).min(1),
    time_averages: z.record(z.number().nullable()),
    exploded: z.boolean(),
    explosion_time: z.number().nullable().optional(),
  })
  .strict();

export type SdeSummary = z.infer<typeof sdeSummarySchema>;

export const parisiOptSchema = z
  .object({
    schema: z.literal("lvglass/parisi-opt/v1"),
    model: z
      .object({
        beta: z.number().positive(),
        phi: z.number().positive(),
        kappa: z.number().min(0),
        alpha: z.number(),
      })
      .passthrough(),
    levels: z.number().int().positive(),
    value: finite,
    arguments: z
      .object({
        a: z.number(),
        d: z.number(),
        h: z.number(),
        gamma: z.number(),
        lambdas: z.array(z.number()),
        atoms: z.array(z.number()),
      })
      .passthrough(),
    residuals: z.record(z.number()),
    converged: z.boolean(),
    outer_evaluations: z.number().int(),
    n_hermite: z.number().int().positive(),
  })
  .strict();

export type ParisiOptReport = z.infer<typeof parisiOptSchema>;

/** Flatten a zod error to "field.path: message" for the first issue. */
export function firstIssue(err: z.ZodError): string {
  const issue = err.issues[0];
  const path = issue.path.length > 0 ? issue.path.join(".") : "(root)";
  return `${path}: ${issue.message}`;
}
